//! Low-rank approximation of unit-row data from partial observations.
//!
//! Generates a rank-6 target on the unit-row manifold, samples a five-fold
//! oversampled observation mask, and recovers the matrix with both solvers.
//!
//! ```text
//! cargo run --release --example fitting
//! ```

use spacedec::problems::{fitting_initial_point, make_fitting};
use spacedec::solver::{solve_rgd, solve_rtr, SolverConfig};

fn main() -> spacedec::Result<()> {
    let (m, n, r_star, oversampling, seed) = (300, 360, 6, 5.0, 42);
    let (data, obj) = make_fitting(m, n, r_star, oversampling, seed)?;
    println!(
        "target {m}x{n}, rank {r_star}, {} observed / {} held-out entries",
        data.mask.len(),
        data.test_mask.len()
    );

    let start = fitting_initial_point(&data, r_star, 10.0, seed)?;
    let mut cfg = SolverConfig::rtr();
    cfg.max_iters = 300;
    let report = solve_rtr(&obj, start, &cfg)?;
    println!(
        "trust region : {:?} after {} iterations, test error {:.3e}, cone measure {:.3e}",
        report.termination,
        report.iterates.len() - 1,
        data.test_error(&report.final_point.embed_x()),
        report.final_stationarity,
    );

    let start = fitting_initial_point(&data, r_star, 0.5, seed)?;
    let mut cfg = SolverConfig::rgd();
    cfg.max_iters = 500;
    cfg.armijo.initial_step = 4.0;
    let report = solve_rgd(&obj, start, &cfg)?;
    println!(
        "gradient     : {:?} after {} iterations, test error {:.3e}",
        report.termination,
        report.iterates.len() - 1,
        data.test_error(&report.final_point.embed_x()),
    );

    // over-estimating the rank still recovers the target with the
    // trust-region solver
    let r = r_star + 2;
    let start = fitting_initial_point(&data, r, 10.0, seed)?;
    let mut cfg = SolverConfig::rtr();
    cfg.max_iters = 500;
    let report = solve_rtr(&obj.with_rank(r), start, &cfg)?;
    println!(
        "rank {r} (over): {:?} after {} iterations, test error {:.3e}",
        report.termination,
        report.iterates.len() - 1,
        data.test_error(&report.final_point.embed_x()),
    );
    Ok(())
}
