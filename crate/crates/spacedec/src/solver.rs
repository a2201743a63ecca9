//! Riemannian gradient descent and trust-region solvers, generic over the
//! decoupled-manifold operations.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{Point, RetractionChoice, StiefelRule, Tangent};
use crate::problems::Objective;
use crate::variational;

/// Line-search parameters for gradient descent.
#[derive(Debug, Clone)]
pub struct ArmijoParams {
    /// Cap on the trial step; the search warm-starts from twice the
    /// previously accepted step.
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            backtrack_factor: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 50,
        }
    }
}

/// Trust-region parameters.
#[derive(Debug, Clone)]
pub struct TrParams {
    pub initial_radius: f64,
    pub max_radius: f64,
    pub eta_accept: f64,
    pub tcg_max_iters: usize,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
}

impl Default for TrParams {
    fn default() -> Self {
        Self {
            initial_radius: 1.0,
            max_radius: 100.0,
            eta_accept: 0.1,
            tcg_max_iters: 200,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
        }
    }
}

/// Which transport moves reference directions between iterates. The shipped
/// solvers are transport-free; the choice is plumbed through for callers
/// that chain their own directions (and for the geometry checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportChoice {
    Projection,
    Decoupled,
    Isometric,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Wall-clock budget in seconds.
    pub time_budget: f64,
    pub armijo: ArmijoParams,
    pub tr: TrParams,
    pub retraction: RetractionChoice,
    pub transport: TransportChoice,
}

impl SolverConfig {
    /// Gradient-descent defaults: first-order polar retraction, tight
    /// gradient tolerance.
    pub fn rgd() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-10,
            time_budget: f64::INFINITY,
            armijo: ArmijoParams::default(),
            tr: TrParams::default(),
            retraction: RetractionChoice::FirstOrder(StiefelRule::Polar),
            transport: TransportChoice::Projection,
        }
    }

    /// Trust-region defaults: second-order retraction.
    pub fn rtr() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-13,
            time_budget: f64::INFINITY,
            armijo: ArmijoParams::default(),
            tr: TrParams::default(),
            retraction: RetractionChoice::SecondOrder,
            transport: TransportChoice::Projection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol > 0.0
            && self.time_budget > 0.0
            && self.armijo.initial_step > 0.0
            && self.armijo.backtrack_factor > 0.0
            && self.armijo.backtrack_factor < 1.0
            && self.armijo.sufficient_decrease > 0.0
            && self.armijo.sufficient_decrease < 1.0
            && self.tr.initial_radius > 0.0
            && self.tr.max_radius >= self.tr.initial_radius
            && self.tr.eta_accept > 0.0
            && self.tr.eta_accept < 1.0
            && self.tr.tcg_kappa > 0.0
            && self.tr.tcg_kappa < 1.0
            && self.tr.tcg_theta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "solver tolerances must be positive and factors inside (0, 1)".into(),
            ))
        }
    }
}

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    GradTol,
    MaxIters,
    TimeBudget,
    StepCollapse,
}

/// One row of the iterate trace.
#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    /// Accepted step size (gradient descent) or trust radius.
    pub step: f64,
    pub wall_ms: f64,
}

/// Outcome of a solve: final point, trace and certification measures.
pub struct SolveReport {
    pub final_point: Point,
    pub iterates: Vec<IterRecord>,
    pub termination: Termination,
    pub final_value: f64,
    pub final_grad_norm: f64,
    /// Ambient cone stationarity measure at the detected rank.
    pub final_stationarity: f64,
    /// Same measure with the rank forced to the bound.
    pub final_stationarity_forced: f64,
    /// Largest constraint residual seen along the iterates.
    pub max_constraint_residual: f64,
}

impl std::fmt::Debug for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolveReport")
            .field("iterations", &(self.iterates.len().saturating_sub(1)))
            .field("termination", &self.termination)
            .field("final_value", &self.final_value)
            .field("final_grad_norm", &self.final_grad_norm)
            .field("final_stationarity", &self.final_stationarity)
            .finish()
    }
}

fn point_residual(p: &Point) -> f64 {
    p.kind()
        .residual_norm(p.h().mat())
        .unwrap_or(f64::INFINITY)
}

fn finite_value(obj: &Objective, x: &crate::linalg::Mat, iteration: usize) -> Result<f64> {
    let f = obj.value(x);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::ObjectiveError {
            iteration,
            message: format!("objective returned {f}"),
        })
    }
}

fn finalize(
    obj: &Objective,
    p: Point,
    iterates: Vec<IterRecord>,
    termination: Termination,
    max_residual: f64,
) -> Result<SolveReport> {
    let x = p.embed_x();
    let egrad = obj.egrad(&x);
    let r = p.rank_bound();
    let kind = p.kind();
    let final_stationarity = variational::stationarity_measure(&x, &egrad, r, kind)?;
    let final_stationarity_forced =
        variational::stationarity_measure_forced(&x, &egrad, r, kind)?;
    let (final_value, final_grad_norm) = match iterates.last() {
        Some(rec) => (rec.f, rec.grad_norm),
        None => (obj.value(&x), 0.0),
    };
    Ok(SolveReport {
        final_point: p,
        iterates,
        termination,
        final_value,
        final_grad_norm,
        final_stationarity,
        final_stationarity_forced,
        max_constraint_residual: max_residual,
    })
}

/// Riemannian gradient descent with Armijo backtracking.
pub fn solve_rgd(obj: &Objective, start: Point, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_rgd_with(obj, start, cfg, &mut |_| {})
}

pub fn solve_rgd_with(
    obj: &Objective,
    start: Point,
    cfg: &SolverConfig,
    on_iterate: &mut dyn FnMut(&IterRecord),
) -> Result<SolveReport> {
    cfg.validate()?;
    let clock = Instant::now();
    let mut p = start;
    let mut iterates = Vec::new();
    let mut max_residual = point_residual(&p);
    let mut prev_step = cfg.armijo.initial_step;
    let mut x = p.embed_x();
    let mut f = finite_value(obj, &x, 0)?;

    let mut iter = 0;
    let termination = loop {
        let egrad = obj.egrad(&x);
        let grad = p.gradient(&egrad);
        let gnorm = p.norm(&grad);
        let rec = IterRecord {
            iter,
            f,
            grad_norm: gnorm,
            step: prev_step,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        };
        on_iterate(&rec);
        iterates.push(rec);

        if gnorm <= cfg.grad_tol {
            break Termination::GradTol;
        }
        if iter >= cfg.max_iters {
            break Termination::MaxIters;
        }
        if clock.elapsed().as_secs_f64() >= cfg.time_budget {
            break Termination::TimeBudget;
        }

        let dir = grad.neg();
        let mut step = (2.0 * prev_step).min(cfg.armijo.initial_step);
        let mut accepted = None;
        for _ in 0..cfg.armijo.max_backtracks {
            match p.retract_with(&dir.scaled(step), cfg.retraction) {
                Ok(cand) => {
                    let cand_x = cand.embed_x();
                    let f_new = obj.value(&cand_x);
                    if f_new.is_finite()
                        && f_new <= f - cfg.armijo.sufficient_decrease * step * gnorm * gnorm
                    {
                        accepted = Some((cand, cand_x, f_new, step));
                        break;
                    }
                }
                // geometric failures reject the trial step
                Err(Error::ProjectionUndefined(_))
                | Err(Error::RankDeficient(_))
                | Err(Error::CayleySingular) => {}
                Err(e) => return Err(e),
            }
            step *= cfg.armijo.backtrack_factor;
        }
        match accepted {
            Some((cand, cand_x, f_new, used)) => {
                p = cand;
                x = cand_x;
                f = f_new;
                prev_step = used;
                max_residual = max_residual.max(point_residual(&p));
                iter += 1;
            }
            None => break Termination::StepCollapse,
        }
    };
    finalize(obj, p, iterates, termination, max_residual)
}

/// Steihaug truncated conjugate gradient for the trust-region subproblem.
///
/// Minimizes `<g, s> + <s, H s>/2` over `||s|| <= delta` in the point's
/// metric. Returns the step and the number of inner iterations.
fn truncated_cg(
    p: &Point,
    grad: &Tangent,
    hess: &mut dyn FnMut(&Tangent) -> Result<Tangent>,
    delta: f64,
    tr: &TrParams,
) -> Result<(Tangent, usize)> {
    let mut s = Tangent::zeros(p.rows(), p.cols(), p.rank_bound());
    let mut r = grad.clone();
    let mut d = r.neg();
    let r0_norm = p.norm(&r);
    if r0_norm == 0.0 {
        return Ok((s, 0));
    }
    let stop = r0_norm * tr.tcg_kappa.min(r0_norm.powf(tr.tcg_theta));
    let mut r_sq = r0_norm * r0_norm;

    let boundary = |s: &Tangent, d: &Tangent| -> f64 {
        let a = p.inner(d, d);
        let b = 2.0 * p.inner(s, d);
        let c = p.inner(s, s) - delta * delta;
        (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)
    };

    for j in 0..tr.tcg_max_iters {
        let hd = hess(&d)?;
        let curvature = p.inner(&d, &hd);
        if curvature <= 0.0 {
            let tau = boundary(&s, &d);
            s.axpy(tau, &d);
            return Ok((s, j + 1));
        }
        let alpha = r_sq / curvature;
        let mut s_next = s.clone();
        s_next.axpy(alpha, &d);
        if p.norm(&s_next) >= delta {
            let tau = boundary(&s, &d);
            s.axpy(tau, &d);
            return Ok((s, j + 1));
        }
        s = s_next;
        r.axpy(alpha, &hd);
        let r_sq_next = p.inner(&r, &r);
        if r_sq_next.sqrt() <= stop {
            return Ok((s, j + 1));
        }
        let beta = r_sq_next / r_sq;
        r_sq = r_sq_next;
        let mut d_next = r.neg();
        d_next.axpy(beta, &d);
        d = d_next;
    }
    Ok((s, tr.tcg_max_iters))
}

/// Riemannian trust-region method with truncated CG inner solves.
pub fn solve_rtr(obj: &Objective, start: Point, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_rtr_with(obj, start, cfg, &mut |_| {})
}

pub fn solve_rtr_with(
    obj: &Objective,
    start: Point,
    cfg: &SolverConfig,
    on_iterate: &mut dyn FnMut(&IterRecord),
) -> Result<SolveReport> {
    cfg.validate()?;
    if !obj.has_hessian() {
        return Err(Error::InvalidConfig(
            "trust-region solve needs a Hessian-apply".into(),
        ));
    }
    let clock = Instant::now();
    let mut p = start;
    let mut iterates = Vec::new();
    let mut max_residual = point_residual(&p);
    let mut delta = cfg.tr.initial_radius;
    let mut x = p.embed_x();
    let mut f = finite_value(obj, &x, 0)?;

    let mut iter = 0;
    let termination = loop {
        let egrad = obj.egrad(&x);
        let grad = p.gradient(&egrad);
        let gnorm = p.norm(&grad);
        let rec = IterRecord {
            iter,
            f,
            grad_norm: gnorm,
            step: delta,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        };
        on_iterate(&rec);
        iterates.push(rec);

        if gnorm <= cfg.grad_tol {
            break Termination::GradTol;
        }
        if iter >= cfg.max_iters {
            break Termination::MaxIters;
        }
        if clock.elapsed().as_secs_f64() >= cfg.time_budget {
            break Termination::TimeBudget;
        }

        let mut hess = |t: &Tangent| -> Result<Tangent> {
            let (eta, _) = p.embed_tangent(t);
            let ehess_eta = obj.ehess_apply(&x, &eta)?;
            p.hessian(&egrad, &ehess_eta, t)
        };
        let (step, _inner) = truncated_cg(&p, &grad, &mut hess, delta, &cfg.tr)?;
        let hstep = hess(&step)?;
        let model_decrease = -p.inner(&grad, &step) - 0.5 * p.inner(&step, &hstep);
        let step_norm = p.norm(&step);

        let candidate = match p.retract_with(&step, cfg.retraction) {
            Ok(c) => Some(c),
            Err(Error::ProjectionUndefined(_))
            | Err(Error::RankDeficient(_))
            | Err(Error::CayleySingular) => None,
            Err(e) => return Err(e),
        };
        let mut rho = -1.0;
        let mut cand_data = None;
        if let Some(cand) = candidate {
            let cand_x = cand.embed_x();
            let f_new = obj.value(&cand_x);
            if f_new.is_finite() && model_decrease > 0.0 {
                // regularization keeps the ratio meaningful once the actual
                // decrease falls below the resolution of f
                let reg = 1e3 * f64::EPSILON * f.abs().max(1.0);
                rho = ((f - f_new) + reg) / (model_decrease + reg);
            }
            cand_data = Some((cand, cand_x, f_new));
        }

        if rho < 0.25 {
            delta *= 0.25;
        } else if rho > 0.75 && step_norm >= 0.8 * delta {
            delta = (2.0 * delta).min(cfg.tr.max_radius);
        }
        if rho >= cfg.tr.eta_accept {
            let (cand, cand_x, f_new) = cand_data.expect("accepted step exists");
            p = cand;
            x = cand_x;
            f = f_new;
            max_residual = max_residual.max(point_residual(&p));
        }
        if delta < 1e-16 {
            break Termination::StepCollapse;
        }
        iter += 1;
    };
    finalize(obj, p, iterates, termination, max_residual)
}
