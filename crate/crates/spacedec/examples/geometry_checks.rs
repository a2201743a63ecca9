//! Runs the geometry property suite on every constraint kind: derivative
//! consistency, retraction orders, transport tangency and isometry, metric
//! consistency, representation independence and the dimension count.
//!
//! ```text
//! cargo run --release --example geometry_checks
//! ```

use spacedec::constraint::ConstraintKind;
use spacedec::diagnostics::run_geometry_suite;

fn main() -> spacedec::Result<()> {
    let kinds = [
        ConstraintKind::Euclidean,
        ConstraintKind::Oblique,
        ConstraintKind::FrobeniusSphere,
        ConstraintKind::StackedStiefel {
            blocks: 4,
            block_rows: 3,
        },
    ];
    let mut all = true;
    for kind in kinds {
        let suite = run_geometry_suite(kind, 12, 14, 4, 0.8, 2024, 5)?;
        println!("== kind {} at 12x14, rank 4 ==", kind.name());
        for check in &suite.checks {
            println!("{}", check.line());
        }
        all &= suite.all_passed();
        println!();
    }
    println!("overall: {}", if all { "all checks passed" } else { "FAILURES above" });
    std::process::exit(if all { 0 } else { 1 });
}
