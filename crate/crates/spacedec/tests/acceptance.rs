//! Acceptance matrix for the toolkit: desk-scale reproductions of the
//! benchmark experiments plus the geometry and cone property suites.
//!
//! Each test prints one `[PASS]`/`[FAIL]` line per criterion (visible with
//! `cargo test --test acceptance -- --nocapture`). Criterion 2's gradient
//! descent half is expected to fail at this scale; see the test body.

use std::time::Instant;

use spacedec::constraint::{ConstraintKind, ConstraintPoint};
use spacedec::diagnostics::run_geometry_suite;
use spacedec::linalg::{self, Mat};
use spacedec::manifold::Point;
use spacedec::problems::{
    blondel_similarity, fitting_initial_point, make_fitting, make_graph_similarity, make_markov,
    make_synchronization, markov_initial_point, similarity_initial_point, sync_initial_point,
    GraphPair, SyncData,
};
use spacedec::solver::{solve_rgd, solve_rtr, SolverConfig, Termination};
use spacedec::variational;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}

const DESK_SEED: u64 = 42;

// 1. Spherical fitting with the unbiased rank parameter r = r* = 6 at
//    500x600, five-fold oversampling: the trust-region solver reaches test
//    error 1e-8 within 300 iterations, gradient descent 1e-6 within 500,
//    both in under a minute.
#[test]
fn criterion_1_fitting_unbiased_rank() {
    let (data, obj) = make_fitting(500, 600, 6, 5.0, DESK_SEED).unwrap();

    let clock = Instant::now();
    let start = fitting_initial_point(&data, 6, 10.0, DESK_SEED).unwrap();
    let mut cfg = SolverConfig::rtr();
    cfg.max_iters = 300;
    let rtr = solve_rtr(&obj, start, &cfg).unwrap();
    let rtr_time = clock.elapsed().as_secs_f64();
    let rtr_err = data.test_error(&rtr.final_point.embed_x());
    let rtr_iters = rtr.iterates.len() - 1;

    // superlinear tail: each of the last three gradient norms at most
    // 0.3x its predecessor
    let g: Vec<f64> = rtr.iterates.iter().map(|r| r.grad_norm).collect();
    let tail_ok = g.len() >= 4
        && g[g.len() - 3..]
            .iter()
            .zip(&g[g.len() - 4..g.len() - 1])
            .all(|(now, prev)| *now <= 0.3 * prev);

    let clock = Instant::now();
    let start = fitting_initial_point(&data, 6, 0.5, DESK_SEED).unwrap();
    let mut cfg = SolverConfig::rgd();
    cfg.max_iters = 500;
    cfg.armijo.initial_step = 4.0;
    let rgd = solve_rgd(&obj, start, &cfg).unwrap();
    let rgd_time = clock.elapsed().as_secs_f64();
    let rgd_err = data.test_error(&rgd.final_point.embed_x());
    let rgd_iters = rgd.iterates.len() - 1;

    let passed = rtr_err <= 1e-8
        && rtr_iters <= 300
        && rtr_time < 60.0
        && tail_ok
        && rgd_err <= 1e-6
        && rgd_iters <= 500
        && rgd_time < 60.0;
    report(
        "criterion 1 (fitting, r = r*)",
        passed,
        &format!(
            "RTR err {rtr_err:.2e} in {rtr_iters} it / {rtr_time:.1}s (tail superlinear: {tail_ok}), \
             RGD err {rgd_err:.2e} in {rgd_iters} it / {rgd_time:.1}s"
        ),
    );
    assert!(passed);
}

// 2a. Over-estimated ranks r = 7..10, trust-region half: test error 1e-8
//     within 500 iterations for every rank.
#[test]
fn criterion_2_fitting_overestimated_rank_rtr() {
    let (data, mut obj) = make_fitting(500, 600, 6, 5.0, DESK_SEED).unwrap();
    let mut all = true;
    let mut details = Vec::new();
    for r in [7usize, 8, 9, 10] {
        obj.set_rank(r);
        let start = fitting_initial_point(&data, r, 10.0, DESK_SEED).unwrap();
        let mut cfg = SolverConfig::rtr();
        cfg.max_iters = 500;
        let rep = solve_rtr(&obj, start, &cfg).unwrap();
        let err = data.test_error(&rep.final_point.embed_x());
        all &= err <= 1e-8 && rep.iterates.len() - 1 <= 500;
        details.push(format!("r={r}: {err:.1e}"));
    }
    report(
        "criterion 2 (fitting, over-estimated rank, RTR)",
        all,
        &details.join(", "),
    );
    assert!(all);
}

// 2b. Over-estimated ranks, gradient-descent half: test error 1e-6 within
//     500 iterations.
//
//     This criterion is NOT attainable at desk scale and is expected to
//     fail: with 500x600 and five-fold oversampling the observation mask
//     admits near-null rank-one directions (measured mask energy ~1e-5 of
//     an average direction), and Armijo gradient descent sheds the spurious
//     extra singular value at a rate of roughly (1 - step * 1e-5) per
//     iteration — about 2e4 iterations for a 1e-6 test error. Seeds, step
//     caps and initializations were swept without effect; the reference
//     behaviour this threshold was ported from arises at 10x larger
//     dimensions where such directions do not exist. The trust-region half
//     (criterion 2a) passes because its model steps exploit the flat
//     directions. The run below executes the criterion exactly as stated.
#[test]
fn criterion_2_fitting_overestimated_rank_rgd() {
    let (data, mut obj) = make_fitting(500, 600, 6, 5.0, DESK_SEED).unwrap();
    let mut all = true;
    let mut details = Vec::new();
    for r in [7usize, 8, 9, 10] {
        obj.set_rank(r);
        let start = fitting_initial_point(&data, r, 0.5, DESK_SEED).unwrap();
        let mut cfg = SolverConfig::rgd();
        cfg.max_iters = 500;
        cfg.armijo.initial_step = 8.0;
        let rep = solve_rgd(&obj, start, &cfg).unwrap();
        let err = data.test_error(&rep.final_point.embed_x());
        all &= err <= 1e-6 && rep.iterates.len() - 1 <= 500;
        details.push(format!("r={r}: {err:.1e}"));
    }
    report(
        "criterion 2 (fitting, over-estimated rank, RGD)",
        all,
        &details.join(", "),
    );
    assert!(
        all,
        "known-unattainable at desk scale; see the test comment: {}",
        details.join(", ")
    );
}

// 3. Graph similarity with a rank-1 solution (directed cycle vs sparse
//    binomial graph, 200 nodes each): relative error against the iterative
//    fixed-point oracle reaches 1e-6 within 200 trust-region iterations for
//    r in {1, 10, 50}.
#[test]
fn criterion_3_graph_similarity_low_rank() {
    let seed = 7u64;
    let mut rng = StdRng::seed_from_u64(seed);
    let ea = GraphPair::cycle_edges(200);
    let eb = GraphPair::binomial_edges(200, 0.005, &mut rng);
    let g = GraphPair::from_edges(200, &ea, 200, &eb).unwrap();
    let oracle = blondel_similarity(&g, 20_000, 1e-12).unwrap();

    // the oracle itself is numerically rank one
    let of = linalg::thin_svd(&oracle).unwrap();
    let rank1 = of.s[1] / of.s[0] <= 1e-8;

    let mut all = rank1;
    let mut details = vec![format!("oracle s2/s1 {:.1e}", of.s[1] / of.s[0])];
    for r in [1usize, 10, 50] {
        let obj = make_graph_similarity(&g, r);
        let start = similarity_initial_point(200, 200, r, 10.0, seed).unwrap();
        let mut cfg = SolverConfig::rtr();
        cfg.max_iters = 200;
        cfg.grad_tol = 1e-9;
        let rep = solve_rtr(&obj, start, &cfg).unwrap();
        let rel = (&rep.final_point.embed_x() - &oracle).norm() / oracle.norm();
        all &= rel <= 1e-6 && rep.iterates.len() - 1 <= 200;
        details.push(format!("r={r}: {rel:.1e} ({} it)", rep.iterates.len() - 1));
    }
    report("criterion 3 (graph similarity, rank-1 solution)", all, &details.join(", "));
    assert!(all);
}

// 4. Graph similarity with a full-rank solution (two binomial graphs with
//    mean out-degree 10 on 200 nodes, r = 200): relative error 1e-10 within
//    10 trust-region iterations.
#[test]
fn criterion_4_graph_similarity_full_rank() {
    let seed = 11u64;
    let m = 200usize;
    let mut rng = StdRng::seed_from_u64(seed);
    let ea = GraphPair::binomial_edges(m, 10.0 / m as f64, &mut rng);
    let eb = GraphPair::binomial_edges(m, 10.0 / m as f64, &mut rng);
    let g = GraphPair::from_edges(m, &ea, m, &eb).unwrap();
    let oracle = blondel_similarity(&g, 20_000, 1e-12).unwrap();

    let obj = make_graph_similarity(&g, m);
    let start = similarity_initial_point(m, m, m, 10.0, seed).unwrap();
    let mut cfg = SolverConfig::rtr();
    cfg.max_iters = 10;
    let rep = solve_rtr(&obj, start, &cfg).unwrap();
    let rel = (&rep.final_point.embed_x() - &oracle).norm() / oracle.norm();
    let passed = rel <= 1e-10 && rep.iterates.len() - 1 <= 10;
    report(
        "criterion 4 (graph similarity, full-rank solution)",
        passed,
        &format!("rel err {rel:.2e} in {} iterations", rep.iterates.len() - 1),
    );
    assert!(passed);
}

// 5. Synchronization with 50 cameras and 300 random relative measurements:
//    exact recovery at zero noise (max edge error 1e-6 — gauge-invariant),
//    median edge error at most 3 sigma under sigma = 0.05 rad noise, and
//    rotation blocks staying special orthogonal from an SO(3) start.
#[test]
fn criterion_5_synchronization() {
    let p = 300.0 / 1225.0;
    let seed = 3u64;

    let (data, obj) = make_synchronization(50, 0.0, p, seed).unwrap();
    assert_eq!(data.edges.len(), 300);
    let start = sync_initial_point(50, 10.0, seed).unwrap();
    let mut cfg = SolverConfig::rtr();
    cfg.max_iters = 300;
    cfg.grad_tol = 1e-10;
    let rep = solve_rtr(&obj, start, &cfg).unwrap();
    let h = rep.final_point.h().mat().clone();
    let errors = data.edge_errors(&h);
    let max_err = errors.iter().cloned().fold(0.0, f64::max);
    let dets_ok = SyncData::block_determinants(&h)
        .iter()
        .all(|d| (d - 1.0).abs() <= 1e-6);

    let (data_n, obj_n) = make_synchronization(50, 0.05, p, seed).unwrap();
    let start = sync_initial_point(50, 10.0, seed).unwrap();
    let rep_n = solve_rtr(&obj_n, start, &cfg).unwrap();
    let mut errors = data_n.edge_errors(rep_n.final_point.h().mat());
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errors[errors.len() / 2];

    let passed = max_err <= 1e-6 && dets_ok && median <= 3.0 * 0.05;
    report(
        "criterion 5 (synchronization)",
        passed,
        &format!(
            "noise 0: max edge error {max_err:.2e}, dets +1: {dets_ok}; \
             sigma=0.05: median edge error {median:.3} (bound 0.15)"
        ),
    );
    assert!(passed);
}

// 6. Markov Hadamard model, 100 states, true rank 5, 1e4 samples per row:
//    gradient descent (omega = 0.5, 500 iterations) from the spectral start
//    fits at least as well as 1.05x the ground-truth parameterization.
#[test]
fn criterion_6_markov_hadamard() {
    let seed = 5u64;
    let (data, obj) = make_markov(100, 5, 0.01, seed).unwrap();
    let start = markov_initial_point(&data, 5, 0.5).unwrap();
    let mut cfg = SolverConfig::rgd();
    cfg.max_iters = 500;
    cfg.armijo.initial_step = 8.0;
    let rep = solve_rgd(&obj, start, &cfg).unwrap();
    let ratio = rep.final_value / data.truth_value;
    let passed = rep.final_value <= 1.05 * data.truth_value;
    report(
        "criterion 6 (Markov Hadamard model)",
        passed,
        &format!(
            "f = {:.3e} vs truth {:.3e} (ratio {ratio:.3}, bound 1.05)",
            rep.final_value, data.truth_value
        ),
    );
    assert!(passed);
}

// 7. Geometry property suite: 20 random instances per kind at dims <= 32
//    (two metric weights x ten instances), every check at its stated
//    tolerance.
#[test]
fn criterion_7_geometry_property_suite() {
    let cases = [
        (ConstraintKind::Euclidean, 24usize, 32usize, 5usize),
        (ConstraintKind::Oblique, 24, 32, 5),
        (ConstraintKind::FrobeniusSphere, 24, 32, 5),
        (
            ConstraintKind::StackedStiefel {
                blocks: 8,
                block_rows: 3,
            },
            24,
            32,
            5,
        ),
    ];
    let mut all = true;
    for (kind, m, n, r) in cases {
        for (omega, seed) in [(0.5, 1000u64), (10.0, 2000u64)] {
            let suite = run_geometry_suite(kind, m, n, r, omega, seed, 10).unwrap();
            for check in &suite.checks {
                if !check.passed {
                    println!("  {} (omega {omega}): {}", kind.name(), check.line());
                }
                all &= check.passed;
            }
        }
    }
    report(
        "criterion 7 (geometry property suite)",
        all,
        "gradient FD, Hessian symmetry + curve, retraction orders, metric, \
         transport isometry, representation independence, dimension count",
    );
    assert!(all);
}

// 8. Cone toolbox: intersection membership and three-way orthogonality on
//    50 random feasible points per kind, agreement with the unconstrained
//    cone for the euclidean kind, and certification of solver-converged
//    full-rank solutions at 1e-6.
#[test]
fn criterion_8_cone_toolbox() {
    let kinds = [
        ConstraintKind::Euclidean,
        ConstraintKind::Oblique,
        ConstraintKind::FrobeniusSphere,
        ConstraintKind::StackedStiefel {
            blocks: 6,
            block_rows: 3,
        },
    ];
    let (m, n) = (18usize, 24usize);
    let mut all = true;
    let mut worst_orth = 0.0f64;
    let mut worst_fd = 0.0f64;

    for kind in kinds {
        let mut rng = StdRng::seed_from_u64(777);
        for trial in 0..50 {
            let r = 4 + trial % 3; // r in {4,5,6}
            let s = 3 + trial % (r - 2); // 3 <= s <= r
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let v = linalg::qr_orthonormalize(&linalg::gaussian(n, s, &mut rng)).unwrap();
            let x = h.mat() * v.transpose();
            let e = linalg::gaussian(m, n, &mut rng);

            let split =
                variational::project_tangent_cone_intersection_split(&x, &e, r, kind).unwrap();
            let scale = 1.0 + e.norm_squared();
            for (a, b) in [
                (&split.constrained, &split.mixed),
                (&split.constrained, &split.corner),
                (&split.mixed, &split.corner),
            ] {
                let orth = linalg::frob_inner(a, b).abs() / scale;
                worst_orth = worst_orth.max(orth);
                all &= orth <= 1e-10;
            }
            // membership in the invariant constraint's tangent space
            let out = split.sum();
            let t = 1e-6;
            let dplus = kind.residual(&(&x + &out * t)).unwrap();
            let dminus = kind.residual(&(&x - &out * t)).unwrap();
            let fd = (dplus - dminus).norm() / (2.0 * t) / (1.0 + out.norm());
            worst_fd = worst_fd.max(fd);
            all &= fd <= 1e-6;

            if kind == ConstraintKind::Euclidean {
                let direct = variational::project_tangent_cone_lowrank(&x, &e, r).unwrap();
                all &= (&out - &direct).norm() <= 1e-12 * (1.0 + e.norm());
            }
        }
    }

    // certification of solver-converged full-rank solutions
    let mut cert_details = Vec::new();
    {
        let (data, obj) = make_fitting(60, 70, 4, 4.0, 9).unwrap();
        let start = fitting_initial_point(&data, 4, 10.0, 9).unwrap();
        let mut cfg = SolverConfig::rtr();
        cfg.grad_tol = 1e-11;
        let rep = solve_rtr(&obj, start, &cfg).unwrap();
        assert_eq!(rep.termination, Termination::GradTol);
        let info = variational::rank_info(&rep.final_point.embed_x(), 4).unwrap();
        all &= info.detected_rank == 4 && rep.final_stationarity <= 1e-6;
        // a converged full-rank iterate certifies at 10x the gradient tolerance
        all &= rep.final_stationarity <= 10.0 * cfg.grad_tol;
        cert_details.push(format!("fitting {:.1e}", rep.final_stationarity));
    }
    {
        let mut rng = StdRng::seed_from_u64(13);
        let nn = 40usize;
        let ea = GraphPair::binomial_edges(nn, 0.25, &mut rng);
        let eb = GraphPair::binomial_edges(nn, 0.25, &mut rng);
        let g = GraphPair::from_edges(nn, &ea, nn, &eb).unwrap();
        let obj = make_graph_similarity(&g, nn);
        let start = similarity_initial_point(nn, nn, nn, 10.0, 13).unwrap();
        let mut cfg = SolverConfig::rtr();
        cfg.grad_tol = 1e-9;
        cfg.max_iters = 60;
        let rep = solve_rtr(&obj, start, &cfg).unwrap();
        all &= rep.final_stationarity <= 1e-6;
        cert_details.push(format!("graph {:.1e}", rep.final_stationarity));
    }
    {
        let (_, obj) = make_synchronization(12, 0.0, 0.5, 17).unwrap();
        let start = sync_initial_point(12, 10.0, 17).unwrap();
        let mut cfg = SolverConfig::rtr();
        cfg.grad_tol = 1e-10;
        let rep = solve_rtr(&obj, start, &cfg).unwrap();
        all &= rep.final_stationarity <= 1e-6;
        cert_details.push(format!("sync {:.1e}", rep.final_stationarity));
    }

    report(
        "criterion 8 (cone toolbox)",
        all,
        &format!(
            "worst orthogonality {worst_orth:.1e}, worst membership derivative {worst_fd:.1e}, \
             certified solutions: {}",
            cert_details.join(", ")
        ),
    );
    assert!(all);
}

// Determinism contract shared by every experiment: identical seeds and
// configs reproduce the iterate count and final value.
#[test]
fn determinism_of_solver_runs() {
    let run = || {
        let (data, obj) = make_fitting(40, 50, 3, 3.0, 21).unwrap();
        let start = fitting_initial_point(&data, 3, 0.5, 21).unwrap();
        let mut cfg = SolverConfig::rgd();
        cfg.max_iters = 80;
        let rep = solve_rgd(&obj, start, &cfg).unwrap();
        (rep.iterates.len(), rep.final_value)
    };
    let (n1, f1) = run();
    let (n2, f2) = run();
    assert_eq!(n1, n2);
    assert!((f1 - f2).abs() <= 1e-14 * (1.0 + f1.abs()));
}

// The stationary-point construction at full rank: a gradient in the normal
// space of the coupled constraints yields a zero manifold gradient and a
// vanishing cone measure.
#[test]
fn full_rank_stationarity_equivalence() {
    let kind = ConstraintKind::Oblique;
    let (m, n, r) = (10usize, 12usize, 3usize);
    let mut rng = StdRng::seed_from_u64(31);
    let h = kind.random_point(m, r, &mut rng).unwrap();
    let v = linalg::qr_orthonormalize(&linalg::gaussian(n, r, &mut rng)).unwrap();
    let x = h.mat() * v.transpose();
    let info = variational::rank_info(&x, r).unwrap();
    assert_eq!(info.detected_rank, r);

    let u = info.svd.u.columns(0, r).into_owned();
    let vv = info.svd.v.columns(0, r).into_owned();
    let mut hh = u.clone();
    for (j, mut col) in hh.column_iter_mut().enumerate() {
        col.scale_mut(info.svd.s[j]);
    }
    let d = nalgebra::DVector::from_fn(m, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let normal = Mat::from_diagonal(&d) * &hh;
    let pu_perp = Mat::identity(m, m) - &u * u.transpose();
    let pv_perp = Mat::identity(n, n) - &vv * vv.transpose();
    let egrad = &normal * vv.transpose() + pu_perp * linalg::gaussian(m, n, &mut rng) * pv_perp;

    let hp = ConstraintPoint::with_tolerance(kind, hh, 1e-6).unwrap();
    let point = Point::new(hp, linalg::qr_orthonormalize(&vv).unwrap(), 1.0).unwrap();
    let (stationary, _) = point.check_first_order_stationary(&egrad, 1e-10);
    assert!(stationary);
    assert!(variational::stationarity_measure(&x, &egrad, r, kind).unwrap() <= 1e-8);
}
