//! Certifying candidate solutions of the original nonsmooth problem with
//! the tangent-cone toolbox.
//!
//! A solver iterate is exported to MatrixMarket files together with its
//! Euclidean gradient; the cone projection of the negative gradient then
//! measures stationarity at the detected rank and at the forced rank bound.
//!
//! ```text
//! cargo run --release --example certify_stationarity
//! ```

use spacedec::constraint::ConstraintKind;
use spacedec::io::{read_matrix_market, write_matrix_market};
use spacedec::problems::{fitting_initial_point, make_fitting};
use spacedec::solver::{solve_rtr, SolverConfig};
use spacedec::variational;

fn main() -> spacedec::Result<()> {
    let (data, obj) = make_fitting(60, 80, 4, 3.0, 17)?;
    let start = fitting_initial_point(&data, 4, 10.0, 17)?;
    let mut cfg = SolverConfig::rtr();
    cfg.grad_tol = 1e-11;
    let report = solve_rtr(&obj, start, &cfg)?;
    let x = report.final_point.embed_x();
    let egrad = obj.egrad(&x);

    let dir = std::env::temp_dir().join("spacedec-certify-example");
    std::fs::create_dir_all(&dir)?;
    let x_path = dir.join("solution.mtx");
    let g_path = dir.join("gradient.mtx");
    write_matrix_market(&x_path, &x)?;
    write_matrix_market(&g_path, &egrad)?;
    println!("wrote {} and {}", x_path.display(), g_path.display());

    // read back and certify, exactly what `spacedec certify` does
    let x = read_matrix_market(&x_path)?;
    let egrad = read_matrix_market(&g_path)?;
    let kind = ConstraintKind::Oblique;
    let info = variational::rank_info(&x, 4)?;
    let at_detected = variational::stationarity_measure(&x, &egrad, 4, kind)?;
    let at_forced = variational::stationarity_measure_forced(&x, &egrad, 4, kind)?;
    println!(
        "detected rank {}, measure {:.3e} (detected) / {:.3e} (forced to 4)",
        info.detected_rank, at_detected, at_forced
    );

    // below the rank bound, stationarity reduces to the invariant
    // constraint alone
    let flat = variational::check_rank_deficient_stationarity(
        &x,
        &spacedec::Mat::zeros(60, 80),
        5,
        kind,
        1e-8,
    )?;
    println!("zero gradient at rank 4 < bound 5 certifies: {flat}");
    Ok(())
}
