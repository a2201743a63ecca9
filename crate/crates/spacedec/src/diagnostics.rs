//! Property checks for the manifold geometry: derivative consistency,
//! retraction orders, transport isometry, metric consistency and the
//! tangent-space dimension count.
//!
//! The same suite backs the `geomtest` subcommand and the acceptance tests.

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::constraint::ConstraintKind;
use crate::error::Result;
use crate::linalg::{self, Mat};
use crate::manifold::{Point, RetractionChoice, StiefelRule, Tangent};
use crate::problems::Objective;

/// Outcome of a single property check, aggregated over the instances.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub name: &'static str,
    /// Worst measured value across instances.
    pub measured: f64,
    pub threshold: f64,
    /// `true` when larger measurements are better (slopes).
    pub at_least: bool,
    pub passed: bool,
    pub skipped: Option<String>,
}

impl PropertyReport {
    fn bounded(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            measured,
            threshold,
            at_least: false,
            passed: measured <= threshold,
            skipped: None,
        }
    }

    fn slope(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            measured,
            threshold,
            at_least: true,
            passed: measured >= threshold,
            skipped: None,
        }
    }

    fn skip(name: &'static str, why: String) -> Self {
        Self {
            name,
            measured: f64::NAN,
            threshold: f64::NAN,
            at_least: false,
            passed: true,
            skipped: Some(why),
        }
    }

    pub fn line(&self) -> String {
        if let Some(why) = &self.skipped {
            return format!("[SKIP] {:<42} {}", self.name, why);
        }
        let rel = if self.at_least { ">=" } else { "<=" };
        format!(
            "[{}] {:<42} measured {:>11.4e}  ({} {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            rel,
            self.threshold
        )
    }
}

/// Aggregate result of the suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub kind: ConstraintKind,
    pub dims: (usize, usize, usize),
    pub checks: Vec<PropertyReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A generic smooth objective with non-trivial higher derivatives, used to
/// probe gradients and Hessians.
pub fn smooth_test_objective(
    m: usize,
    n: usize,
    kind: ConstraintKind,
    rank: usize,
    seed: u64,
) -> Objective {
    let mut rng = StdRng::seed_from_u64(seed);
    let target = linalg::gaussian(m, n, &mut rng);
    let amp = linalg::gaussian(m, n, &mut rng) * 0.3;
    let (tv, av) = (target.clone(), amp.clone());
    let value = move |x: &Mat| 0.5 * (x - &tv).norm_squared() + av.dot(&x.map(f64::sin));
    let (tg, ag) = (target, amp.clone());
    let egrad = move |x: &Mat| (x - &tg) + ag.component_mul(&x.map(f64::cos));
    let ah = amp;
    let ehess = move |x: &Mat, eta: &Mat| {
        eta - ah.component_mul(&x.map(f64::sin)).component_mul(eta)
    };
    Objective::new(
        m,
        n,
        kind,
        rank,
        Box::new(value),
        Box::new(egrad),
        Some(Box::new(ehess)),
    )
}

fn unit_tangent(p: &Point, rng: &mut StdRng) -> Tangent {
    let t = p.random_tangent(rng);
    let norm = p.norm(&t);
    t.scaled(1.0 / norm)
}

fn fbar(obj: &Objective, p: &Point) -> f64 {
    obj.value(&p.embed_x())
}

/// Least-squares slope of `log residual` against `log t`, ignoring residuals
/// at the numerical floor. Returns `+inf` when nothing is measurable (the
/// retraction is exact).
fn fit_slope(ts: &[f64], residuals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(residuals)
        .filter(|(_, &r)| r > 1e-13)
        .map(|(&t, &r)| (t.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

const SLOPE_TS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

fn first_order_residuals(p: &Point, t: &Tangent, rule: StiefelRule) -> Result<Vec<f64>> {
    let (x0, g0) = p.embed();
    let (eta, zeta) = p.embed_tangent(t);
    let mut out = Vec::new();
    for &s in &SLOPE_TS {
        let q = p.retract(&t.scaled(s), rule)?;
        let (x1, g1) = q.embed();
        let dx = &x1 - &x0 - &eta * s;
        let dg = &g1 - &g0 - &zeta * s;
        out.push((dx.norm_squared() + dg.norm_squared()).sqrt());
    }
    Ok(out)
}

fn second_order_residuals(p: &Point, t: &Tangent) -> Result<Vec<f64>> {
    let (x0, g0) = p.embed();
    let (eta, zeta) = p.embed_tangent(t);
    let mut out = Vec::new();
    for &s in &SLOPE_TS {
        let q = p.retract_second_order(&t.scaled(s))?;
        let (x1, g1) = q.embed();
        let dx = &x1 - &x0 - &eta * s;
        let dg = &g1 - &g0 - &zeta * s;
        // only the tangential part of the residual must vanish at third order
        let proj = p.project(&dx, &linalg::sym_part(&dg)?)?;
        out.push(p.norm(&proj));
    }
    Ok(out)
}

/// Runs every property check on `instances` random instances and keeps the
/// worst measurement per property.
pub fn run_geometry_suite(
    kind: ConstraintKind,
    m: usize,
    n: usize,
    r: usize,
    omega: f64,
    seed: u64,
    instances: usize,
) -> Result<SuiteReport> {
    let mut grad_fd = 0.0f64;
    let mut hess_sym = 0.0f64;
    let mut hess_curve = 0.0f64;
    let mut slope1_polar = f64::INFINITY;
    let mut slope1_cayley = f64::INFINITY;
    let mut slope2 = f64::INFINITY;
    let mut metric = 0.0f64;
    let mut iso = 0.0f64;
    let mut rep_indep = 0.0f64;
    let mut transport_tangency = 0.0f64;
    let mut dim_ok = true;

    for inst in 0..instances {
        let inst_seed = seed.wrapping_add(1000 * inst as u64);
        let mut rng = StdRng::seed_from_u64(inst_seed.wrapping_add(1));
        let p = Point::random(kind, m, n, r, omega, inst_seed)?;
        let obj = smooth_test_objective(m, n, kind, r, inst_seed.wrapping_add(2));
        let x = p.embed_x();
        let egrad = obj.egrad(&x);
        let grad = p.gradient(&egrad);
        let t1 = unit_tangent(&p, &mut rng);
        let t2 = unit_tangent(&p, &mut rng);

        // gradient against a finite difference along the retraction
        let eps = 1e-5;
        let fp = fbar(&obj, &p.retract(&t1.scaled(eps), StiefelRule::Polar)?);
        let fm = fbar(&obj, &p.retract(&t1.scaled(-eps), StiefelRule::Polar)?);
        let fd = (fp - fm) / (2.0 * eps);
        let pairing = p.inner(&grad, &t1);
        grad_fd = grad_fd.max((fd - pairing).abs() / (1.0 + pairing.abs()));

        // Hessian symmetry and curve test
        let hess = |t: &Tangent| -> Result<Tangent> {
            let (eta, _) = p.embed_tangent(t);
            let he = obj.ehess_apply(&x, &eta)?;
            p.hessian(&egrad, &he, t)
        };
        let h1 = hess(&t1)?;
        let h2 = hess(&t2)?;
        let sym = (p.inner(&h1, &t2) - p.inner(&t1, &h2)).abs();
        hess_sym = hess_sym.max(sym);

        let hstep = 1e-4;
        let f0 = fbar(&obj, &p);
        let fp = fbar(&obj, &p.retract_second_order(&t1.scaled(hstep))?);
        let fm = fbar(&obj, &p.retract_second_order(&t1.scaled(-hstep))?);
        let curve_fd = (fp - 2.0 * f0 + fm) / (hstep * hstep);
        let quad = p.inner(&t1, &h1);
        hess_curve = hess_curve.max((curve_fd - quad).abs() / (1.0 + quad.abs()));

        // retraction orders
        slope1_polar =
            slope1_polar.min(fit_slope(&SLOPE_TS, &first_order_residuals(&p, &t1, StiefelRule::Polar)?));
        slope1_cayley = slope1_cayley
            .min(fit_slope(&SLOPE_TS, &first_order_residuals(&p, &t1, StiefelRule::Cayley)?));
        slope2 = slope2.min(fit_slope(&SLOPE_TS, &second_order_residuals(&p, &t1)?));

        // representation metric against the ambient weighted product
        let (e1, z1) = p.embed_tangent(&t1);
        let (e2, z2) = p.embed_tangent(&t2);
        let ambient = linalg::frob_inner(&e1, &e2) + omega * linalg::frob_inner(&z1, &z2);
        metric = metric.max((ambient - p.inner(&t1, &t2)).abs());

        // transports: tangency at the target, isometry where guaranteed
        let dir = t2.scaled(0.3);
        for choice in ["projection", "decoupled", "isometric"] {
            let (q, moved) = match choice {
                "projection" => p.transport_projection(
                    &dir,
                    &t1,
                    RetractionChoice::FirstOrder(StiefelRule::Polar),
                )?,
                "decoupled" => p.transport_decoupled(&dir, &t1, StiefelRule::Polar)?,
                _ => p.transport_isometric(&dir, &t1)?,
            };
            transport_tangency = transport_tangency.max(q.tangent_residual(&moved));
            if choice == "isometric" && kind == ConstraintKind::Euclidean {
                let drift = (q.inner(&moved, &moved) - p.inner(&t1, &t1)).abs();
                iso = iso.max(drift);
            }
        }

        // representation independence under a rotated factorization
        let q = linalg::qr_orthonormalize(&linalg::gaussian(r, r, &mut rng))?;
        let hq = crate::constraint::ConstraintPoint::new(kind, p.h().mat() * &q)?;
        let p2 = Point::new(hq, p.v() * &q, omega)?;
        let t1q = Tangent {
            k: &t1.k * &q,
            v_p: &t1.v_p * &q,
        };
        let (xa, ga) = p.retract_second_order(&t1.scaled(0.3))?.embed();
        let (xb, gb) = p2.retract_second_order(&t1q.scaled(0.3))?.embed();
        let dev = ((&xa - &xb).norm_squared() + (&ga - &gb).norm_squared()).sqrt();
        rep_indep = rep_indep.max(dev);
        rep_indep = rep_indep.max((p.inner(&t1, &t1) - p2.inner(&t1q, &t1q)).abs());

        // dimension of the embedded tangent span (once per suite)
        if inst == 0 {
            let expected = p.dim();
            let count = expected + 6;
            let mut vectors = Vec::with_capacity(count);
            for _ in 0..count {
                let t = p.random_tangent(&mut rng);
                let (e, z) = p.embed_tangent(&t);
                let mut flat = Vec::with_capacity(m * n + n * n);
                flat.extend(e.iter().copied());
                flat.extend(z.iter().copied());
                vectors.push(flat);
            }
            let mut gram = Mat::zeros(count, count);
            for i in 0..count {
                for j in i..count {
                    let dot: f64 = vectors[i]
                        .iter()
                        .zip(&vectors[j])
                        .map(|(a, b)| a * b)
                        .sum();
                    gram[(i, j)] = dot;
                    gram[(j, i)] = dot;
                }
            }
            let eig = nalgebra::SymmetricEigen::new(gram);
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let numeric_rank = eig
                .eigenvalues
                .iter()
                .filter(|&&l| l > 1e-9 * lmax)
                .count();
            dim_ok &= numeric_rank == expected;
        }
    }

    let iso_check = if kind == ConstraintKind::Euclidean {
        PropertyReport::bounded("isometric transport norm preservation", iso, 1e-10)
    } else {
        PropertyReport::skip(
            "isometric transport norm preservation",
            format!(
                "isometry of the constraint-factor transport is not guaranteed for {}",
                kind.name()
            ),
        )
    };

    let checks = vec![
        PropertyReport::bounded("gradient finite-difference", grad_fd, 1e-6),
        PropertyReport::bounded("hessian symmetry", hess_sym, 1e-9),
        PropertyReport::bounded("hessian curve test", hess_curve, 1e-4),
        PropertyReport::slope("first-order retraction order (polar)", slope1_polar, 1.9),
        PropertyReport::slope("first-order retraction order (cayley)", slope1_cayley, 1.9),
        PropertyReport::slope("second-order retraction order", slope2, 2.9),
        PropertyReport::bounded("metric matches ambient product", metric, 1e-10),
        iso_check,
        PropertyReport::bounded("representation independence", rep_indep, 1e-10),
        PropertyReport::bounded("transport tangency", transport_tangency, 1e-10),
        PropertyReport {
            name: "tangent dimension count",
            measured: if dim_ok { 0.0 } else { 1.0 },
            threshold: 0.5,
            at_least: false,
            passed: dim_ok,
            skipped: None,
        },
    ];

    Ok(SuiteReport {
        kind,
        dims: (m, n, r),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_every_kind() {
        for (kind, m) in [
            (ConstraintKind::Euclidean, 7),
            (ConstraintKind::Oblique, 7),
            (ConstraintKind::FrobeniusSphere, 7),
            (
                ConstraintKind::StackedStiefel {
                    blocks: 3,
                    block_rows: 2,
                },
                6,
            ),
        ] {
            let report = run_geometry_suite(kind, m, 8, 3, 0.7, 99, 3).unwrap();
            for check in &report.checks {
                assert!(check.passed, "{}: {}", kind.name(), check.line());
            }
        }
    }

    #[test]
    fn slope_fit_handles_exact_retractions() {
        assert!(fit_slope(&SLOPE_TS, &[0.0, 0.0, 0.0, 0.0]).is_infinite());
        let quadratic: Vec<f64> = SLOPE_TS.iter().map(|t| t * t).collect();
        let s = fit_slope(&SLOPE_TS, &quadratic);
        assert!((s - 2.0).abs() < 1e-6);
    }
}
