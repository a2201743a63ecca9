//! Objective instances and synthetic data generators for the benchmark
//! problems, plus the iterative similarity baseline used as an oracle.

mod fitting;
mod graph;
mod markov;
mod sync;

pub use fitting::{make_fitting, fitting_initial_point, MaskedFittingData};
pub use graph::{
    blondel_similarity, make_graph_similarity, similarity_initial_point, GraphPair,
};
pub use markov::{make_markov, markov_initial_point, markov_random_point, MarkovData};
pub use sync::{make_synchronization, sync_initial_point, SyncData};

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::constraint::ConstraintKind;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

type ValueFn = Box<dyn Fn(&Mat) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Mat) -> Mat + Send + Sync>;
type HessFn = Box<dyn Fn(&Mat, &Mat) -> Mat + Send + Sync>;

/// A twice-differentiable objective on the ambient matrix space, together
/// with the constraint kind and rank bound of the feasible set it targets.
pub struct Objective {
    m: usize,
    n: usize,
    kind: ConstraintKind,
    rank: usize,
    value: ValueFn,
    egrad: GradFn,
    ehess: Option<HessFn>,
}

impl Objective {
    pub fn new(
        m: usize,
        n: usize,
        kind: ConstraintKind,
        rank: usize,
        value: ValueFn,
        egrad: GradFn,
        ehess: Option<HessFn>,
    ) -> Self {
        Self {
            m,
            n,
            kind,
            rank,
            value,
            egrad,
            ehess,
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Overrides the rank bound (experiments sweep over-estimated ranks).
    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn set_rank(&mut self, rank: usize) {
        self.rank = rank;
    }

    pub fn value(&self, x: &Mat) -> f64 {
        (self.value)(x)
    }

    pub fn egrad(&self, x: &Mat) -> Mat {
        (self.egrad)(x)
    }

    pub fn has_hessian(&self) -> bool {
        self.ehess.is_some()
    }

    pub fn ehess_apply(&self, x: &Mat, eta: &Mat) -> Result<Mat> {
        match &self.ehess {
            Some(h) => Ok(h(x, eta)),
            None => Err(Error::InvalidConfig(
                "objective does not provide a Hessian".into(),
            )),
        }
    }

    /// Central-difference validation of the gradient (and Hessian when
    /// present) on random probes. Returns the worst relative errors, after
    /// discounting the provable floating-point floor `eps/h * |f|` of the
    /// difference quotient so that large-valued objectives are not rejected
    /// for roundoff alone.
    pub fn validate_derivatives(&self, probes: usize, seed: u64) -> Result<(f64, f64)> {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = 1e-6;
        let fp_floor = 100.0 * f64::EPSILON / h;
        let mut worst_grad = 0.0f64;
        let mut worst_hess = 0.0f64;
        for _ in 0..probes {
            let x = linalg::gaussian(self.m, self.n, &mut rng);
            let dir = {
                let d = linalg::gaussian(self.m, self.n, &mut rng);
                let norm = d.norm();
                d / norm
            };
            let fp = self.value(&(&x + &dir * h));
            let fm = self.value(&(&x - &dir * h));
            let fd = (fp - fm) / (2.0 * h);
            let analytic = linalg::frob_inner(&self.egrad(&x), &dir);
            let floor = fp_floor * fp.abs().max(fm.abs());
            let rel = ((fd - analytic).abs() - floor).max(0.0) / (1.0 + analytic.abs());
            worst_grad = worst_grad.max(rel);

            if self.ehess.is_some() {
                let gp = self.egrad(&(&x + &dir * h));
                let gm = self.egrad(&(&x - &dir * h));
                let floor = fp_floor * gp.norm().max(gm.norm());
                let fd = (gp - gm) / (2.0 * h);
                let analytic = self.ehess_apply(&x, &dir)?;
                let rel = ((&fd - &analytic).norm() - floor).max(0.0) / (1.0 + analytic.norm());
                worst_hess = worst_hess.max(rel);
            }
        }
        if worst_grad > 1e-5 {
            return Err(Error::ObjectiveError {
                iteration: 0,
                message: format!("gradient failed finite-difference check ({worst_grad:.3e})"),
            });
        }
        if worst_hess > 1e-5 {
            return Err(Error::ObjectiveError {
                iteration: 0,
                message: format!("Hessian failed finite-difference check ({worst_hess:.3e})"),
            });
        }
        Ok((worst_grad, worst_hess))
    }
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("m", &self.m)
            .field("n", &self.n)
            .field("kind", &self.kind.name())
            .field("rank", &self.rank)
            .field("has_hessian", &self.ehess.is_some())
            .finish()
    }
}
