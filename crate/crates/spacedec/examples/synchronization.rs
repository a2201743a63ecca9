//! Rotation synchronization from noisy relative measurements.
//!
//! Absolute rotations are recovered from pairwise products by minimizing a
//! quadratic form over stacked orthonormal blocks with a rank-3 bound. Edge
//! errors are gauge-invariant, so no alignment step is needed to score the
//! result.
//!
//! ```text
//! cargo run --release --example synchronization
//! ```

use spacedec::problems::{make_synchronization, sync_initial_point, SyncData};
use spacedec::solver::{solve_rtr, SolverConfig};

fn main() -> spacedec::Result<()> {
    let cams = 40;
    let density = 0.25;
    for noise in [0.0, 0.05] {
        let (data, obj) = make_synchronization(cams, noise, density, 3)?;
        let start = sync_initial_point(cams, 10.0, 3)?;
        let mut cfg = SolverConfig::rtr();
        cfg.grad_tol = 1e-10;
        cfg.max_iters = 300;
        let report = solve_rtr(&obj, start, &cfg)?;

        let h = report.final_point.h().mat();
        let mut errors = data.edge_errors(h);
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dets = SyncData::block_determinants(h);
        println!(
            "noise {noise:4}: {} edges, f = {:11.4e} (truth {:11.4e}), \
             median edge error {:.3e}, max {:.3e}, min block det {:.6}",
            data.edges.len(),
            report.final_value,
            data.truth_value(),
            errors[errors.len() / 2],
            errors.last().unwrap(),
            dets.iter().cloned().fold(f64::INFINITY, f64::min),
        );
    }
    Ok(())
}
