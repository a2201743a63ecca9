//! The rank-decoupled manifold of pairs `(X, G)` with `X G = 0` and
//! `h(X) = 0`, where `G` is an orthogonal projector of rank `n - r`.
//!
//! Points are stored through the representation `(H, V)` with `X = H V^T`,
//! `G = I - V V^T`, `H` feasible for the induced constraint set in
//! `R^{m x r}` and `V` orthonormal. Tangent vectors are stored as `(K, V_p)`
//! with `K` tangent at `H` and `V^T V_p = 0`; they embed as
//! `(K V^T + H V_p^T, -V_p V^T - V V_p^T)`.
//!
//! The metric carries a weight `omega` on the projector component. In the
//! representation it reads `<K1, K2> + <V_p1, V_p2 M>` with
//! `M = 2*omega*I + H^T H`, which is kept factored once per point.

use nalgebra::{Cholesky, Dyn};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::constraint::{ConstraintKind, ConstraintPoint};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Tolerance on the orthonormality of `V` and tangent invariants.
pub const REP_TOL: f64 = 1e-10;

/// Positive metric weight on the projector component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeight(f64);

impl MetricWeight {
    pub fn new(omega: f64) -> Result<Self> {
        if omega > 0.0 && omega.is_finite() {
            Ok(Self(omega))
        } else {
            Err(Error::InvalidInput(format!(
                "metric weight must be positive, got {omega}"
            )))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Which retraction is used on the orthonormal factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StiefelRule {
    Polar,
    Cayley,
}

/// Retraction choice for operations that need to move a base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetractionChoice {
    FirstOrder(StiefelRule),
    SecondOrder,
}

/// A point of the decoupled manifold, held in factored form.
#[derive(Debug, Clone)]
pub struct Point {
    h: ConstraintPoint,
    v: Mat,
    omega: MetricWeight,
    gram: Mat,
    chol: Cholesky<f64, Dyn>,
}

/// A tangent vector at a [`Point`], in the `(K, V_p)` representation.
#[derive(Debug, Clone)]
pub struct Tangent {
    pub k: Mat,
    pub v_p: Mat,
}

impl Tangent {
    pub fn zeros(m: usize, n: usize, r: usize) -> Self {
        Self {
            k: Mat::zeros(m, r),
            v_p: Mat::zeros(n, r),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            k: &self.k * a,
            v_p: &self.v_p * a,
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.k += &other.k * a;
        self.v_p += &other.v_p * a;
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            k: &self.k + &other.k,
            v_p: &self.v_p + &other.v_p,
        }
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }
}

impl Point {
    /// Builds a point from a feasible `H` and an orthonormal `V`.
    pub fn new(h: ConstraintPoint, v: Mat, omega: f64) -> Result<Self> {
        let omega = MetricWeight::new(omega)?;
        let r = h.mat().ncols();
        if v.ncols() != r {
            return Err(Error::InvalidInput(format!(
                "H has {r} columns but V has {}",
                v.ncols()
            )));
        }
        if v.nrows() < r {
            return Err(Error::InvalidInput(format!(
                "V must be tall, got {}x{}",
                v.nrows(),
                r
            )));
        }
        let ortho = (v.transpose() * &v - Mat::identity(r, r)).norm();
        if ortho > 1e-12 * (r as f64).sqrt().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "V is not orthonormal (deviation {ortho:.3e})"
            )));
        }
        let gram = Mat::from_diagonal_element(r, r, 2.0 * omega.value()) + h.mat().transpose() * h.mat();
        let chol = Cholesky::new(gram.clone())
            .ok_or_else(|| Error::InvalidInput("Gram matrix is not positive definite".into()))?;
        Ok(Self { h, v, omega, gram, chol })
    }

    /// Random point: Gaussian `V` orthonormalized by QR, Gaussian `H`
    /// projected onto the constraint set. Deterministic for a fixed seed.
    pub fn random(
        kind: ConstraintKind,
        m: usize,
        n: usize,
        r: usize,
        omega: f64,
        seed: u64,
    ) -> Result<Self> {
        if r > m.min(n) {
            return Err(Error::InvalidInput(format!(
                "rank {r} exceeds min({m}, {n})"
            )));
        }
        let mut rng = StdRng::seed_from_u64(seed);
        Self::random_with(kind, m, n, r, omega, &mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(
        kind: ConstraintKind,
        m: usize,
        n: usize,
        r: usize,
        omega: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let h = kind.random_point(m, r, rng)?;
        let v = linalg::qr_orthonormalize(&linalg::gaussian(n, r, rng))?;
        Self::new(h, v, omega)
    }

    pub fn kind(&self) -> ConstraintKind {
        self.h.kind()
    }

    pub fn h(&self) -> &ConstraintPoint {
        &self.h
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    pub fn omega(&self) -> f64 {
        self.omega.value()
    }

    pub fn rows(&self) -> usize {
        self.h.mat().nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.v.ncols()
    }

    /// Manifold dimension `(m + n - r) r - q`.
    pub fn dim(&self) -> usize {
        let (m, n, r) = (self.rows(), self.cols(), self.rank_bound());
        (m + n - r) * r - self.kind().codim(m)
    }

    /// `A * M^{-1}` for row-shaped `A` (columns match the rank).
    fn gram_solve_right(&self, a: &Mat) -> Mat {
        self.chol.solve(&a.transpose()).transpose()
    }

    /// Ambient pair `(X, G) = (H V^T, I - V V^T)`.
    pub fn embed(&self) -> (Mat, Mat) {
        let x = self.h.mat() * self.v.transpose();
        let n = self.cols();
        let g = Mat::identity(n, n) - &self.v * self.v.transpose();
        (x, g)
    }

    /// Just the matrix component `X = H V^T`.
    pub fn embed_x(&self) -> Mat {
        self.h.mat() * self.v.transpose()
    }

    /// Ambient pair of a tangent vector.
    pub fn embed_tangent(&self, t: &Tangent) -> (Mat, Mat) {
        let eta = &t.k * self.v.transpose() + self.h.mat() * t.v_p.transpose();
        let zeta = -(&t.v_p * self.v.transpose() + &self.v * t.v_p.transpose());
        (eta, zeta)
    }

    /// Metric inner product of two tangent vectors at this point.
    pub fn inner(&self, t1: &Tangent, t2: &Tangent) -> f64 {
        linalg::frob_inner(&t1.k, &t2.k) + linalg::frob_inner(&t1.v_p, &(&t2.v_p * &self.gram))
    }

    pub fn norm(&self, t: &Tangent) -> f64 {
        self.inner(t, t).max(0.0).sqrt()
    }

    /// How far `(K, V_p)` is from satisfying the tangent invariants.
    pub fn tangent_residual(&self, t: &Tangent) -> f64 {
        let kp = self.kind().project_tangent(&self.h, &t.k);
        let kres = (&kp - &t.k).norm() / (1.0 + t.k.norm());
        let vres = (self.v.transpose() * &t.v_p).norm() / (1.0 + t.v_p.norm());
        kres.max(vres)
    }

    /// Re-imposes the tangent invariants by projection.
    pub fn reproject_tangent(&self, t: &Tangent) -> Tangent {
        Tangent {
            k: self.kind().project_tangent(&self.h, &t.k),
            v_p: &t.v_p - &self.v * (self.v.transpose() * &t.v_p),
        }
    }

    fn cleaned<'a>(&self, t: &'a Tangent) -> std::borrow::Cow<'a, Tangent> {
        if self.tangent_residual(t) > REP_TOL {
            std::borrow::Cow::Owned(self.reproject_tangent(t))
        } else {
            std::borrow::Cow::Borrowed(t)
        }
    }

    /// Random tangent vector (Gaussian, projected).
    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R) -> Tangent {
        let raw = Tangent {
            k: linalg::gaussian(self.rows(), self.rank_bound(), rng),
            v_p: linalg::gaussian(self.cols(), self.rank_bound(), rng),
        };
        self.reproject_tangent(&raw)
    }

    /// Projection of an ambient pair `(E, Z)` (with `Z` symmetric) onto the
    /// tangent space at this point.
    pub fn project(&self, e: &Mat, z: &Mat) -> Result<Tangent> {
        if e.shape() != (self.rows(), self.cols()) || z.shape() != (self.cols(), self.cols()) {
            return Err(Error::InvalidInput("ambient pair has wrong shape".into()));
        }
        let skew = (z - z.transpose()).norm();
        if skew > 1e-10 * (1.0 + z.norm()) {
            return Err(Error::InvalidInput(format!(
                "projector component must be symmetric (skew part {skew:.3e})"
            )));
        }
        let k = self.kind().project_tangent(&self.h, &(e * &self.v));
        let raw = e.transpose() * self.h.mat() - (z * &self.v) * (2.0 * self.omega());
        let solved = self.gram_solve_right(&raw);
        let v_p = &solved - &self.v * (self.v.transpose() * &solved);
        Ok(Tangent { k, v_p })
    }

    /// Riemannian gradient from the Euclidean gradient of `f` at `X`.
    pub fn gradient(&self, egrad: &Mat) -> Tangent {
        let k = self.kind().project_tangent(&self.h, &(egrad * &self.v));
        let raw = egrad.transpose() * self.h.mat();
        let solved = self.gram_solve_right(&raw);
        let v_p = &solved - &self.v * (self.v.transpose() * &solved);
        Tangent { k, v_p }
    }

    /// Gradient norm and whether it meets `tol`.
    pub fn check_first_order_stationary(&self, egrad: &Mat, tol: f64) -> (bool, f64) {
        let g = self.gradient(egrad);
        let res = self.norm(&g);
        (res <= tol, res)
    }

    /// `W_{H,omega} a = a - H M^{-1} H^T a`.
    fn w_apply(&self, a: &Mat) -> Mat {
        a - self.h.mat() * self.chol.solve(&(self.h.mat().transpose() * a))
    }

    /// Riemannian Hessian applied to `t`.
    ///
    /// `egrad` is the Euclidean gradient at `X` and `ehess_eta` the Euclidean
    /// Hessian applied to the embedded direction of `t`.
    pub fn hessian(&self, egrad: &Mat, ehess_eta: &Mat, t: &Tangent) -> Result<Tangent> {
        let t = self.cleaned(t);
        let hm = self.h.mat();
        let egrad_v = egrad * &self.v;
        let ehess_v = ehess_eta * &self.v;

        // K part: Hessian on the constraint factor plus the coupling term
        let rhess_v = self
            .kind()
            .ehess_to_rhess(&self.h, &egrad_v, &ehess_v, &t.k)?;
        let coupling = self.w_apply(&(egrad * &t.v_p));
        let k = rhess_v + self.kind().project_tangent(&self.h, &coupling);

        // V_p part
        let normal_part = &egrad_v - self.kind().project_tangent(&self.h, &egrad_v);
        let wk = self.w_apply(&t.k);
        let raw = -(&t.v_p * (normal_part.transpose() * hm))
            + ehess_eta.transpose() * hm
            + egrad.transpose() * wk;
        let solved = self.gram_solve_right(&raw);
        let v_p = &solved - &self.v * (self.v.transpose() * &solved);
        Ok(Tangent { k, v_p })
    }

    fn stiefel_retract(&self, v_p: &Mat, rule: StiefelRule) -> Result<Mat> {
        match rule {
            StiefelRule::Polar => linalg::polar_factor(&(&self.v + v_p)),
            StiefelRule::Cayley => cayley_apply(&self.v, v_p, &self.v),
        }
    }

    /// First-order retraction assembled from the two factor retractions.
    pub fn retract(&self, t: &Tangent, rule: StiefelRule) -> Result<Point> {
        let t = self.cleaned(t);
        let h_new = self.kind().retract(&self.h, &t.k)?;
        let v_new = self.stiefel_retract(&t.v_p, rule)?;
        Point::new(h_new, v_new, self.omega())
    }

    /// Second-order retraction.
    pub fn retract_second_order(&self, t: &Tangent) -> Result<Point> {
        let t = self.cleaned(t);
        let hm = self.h.mat();
        let r = self.rank_bound();
        let kth = t.k.transpose() * hm;
        let c = Mat::identity(r, r) - self.chol.solve(&kth.transpose()).transpose();
        let l = &self.v + &t.v_p * c;
        let w = linalg::polar_factor(&l)?;
        // (X + eta) W expressed through the representation
        let moved = (hm + &t.k) * (self.v.transpose() * &w) + hm * (t.v_p.transpose() * &w);
        let h_new = self.kind().project_point(&moved)?;
        Point::new(h_new, w, self.omega())
    }

    pub fn retract_with(&self, t: &Tangent, choice: RetractionChoice) -> Result<Point> {
        match choice {
            RetractionChoice::FirstOrder(rule) => self.retract(t, rule),
            RetractionChoice::SecondOrder => self.retract_second_order(t),
        }
    }

    /// Projection-based transport: project the embedded vector onto the
    /// tangent space at the retracted point.
    pub fn transport_projection(
        &self,
        t_dir: &Tangent,
        t: &Tangent,
        retraction: RetractionChoice,
    ) -> Result<(Point, Tangent)> {
        let target = self.retract_with(t_dir, retraction)?;
        let moved = self.transport_projection_to(&target, t);
        Ok((target, moved))
    }

    /// Projection transport onto the tangent space of an explicit target.
    pub fn transport_projection_to(&self, target: &Point, t: &Tangent) -> Tangent {
        let hm = self.h.mat();
        let ht = target.h.mat();
        let vt = &target.v;
        let vtv = self.v.transpose() * vt;
        let vptv = t.v_p.transpose() * vt;
        let k = target
            .kind()
            .project_tangent(&target.h, &(&t.k * &vtv + hm * &vptv));
        let raw = &self.v * (t.k.transpose() * ht)
            + &t.v_p * (hm.transpose() * ht)
            + (&self.v * &vptv + &t.v_p * &vtv) * (2.0 * self.omega());
        let solved = target.gram_solve_right(&raw);
        let v_p = &solved - vt * (vt.transpose() * &solved);
        Tangent { k, v_p }
    }

    /// Transport built factor-wise from the component transports.
    pub fn transport_decoupled(
        &self,
        t_dir: &Tangent,
        t: &Tangent,
        rule: StiefelRule,
    ) -> Result<(Point, Tangent)> {
        let h_new = self.kind().retract(&self.h, &t_dir.k)?;
        let v_new = self.stiefel_retract(&t_dir.v_p, rule)?;
        let target = Point::new(h_new, v_new, self.omega())?;

        let k = target.kind().project_tangent(&target.h, &t.k);
        let moved_vp = match rule {
            StiefelRule::Polar => {
                // projection-based Stiefel transport
                let s = linalg::sym_part(&(target.v.transpose() * &t.v_p))?;
                &t.v_p - &target.v * s
            }
            StiefelRule::Cayley => cayley_apply(&self.v, &t_dir.v_p, &t.v_p)?,
        };
        let v_p = &moved_vp - &target.v * (target.v.transpose() * &moved_vp);
        Ok((target, Tangent { k, v_p }))
    }

    /// Isometric transport: Cayley pair on the orthonormal factor with the
    /// Gram-weighted scaling, projection transport on the constraint factor.
    ///
    /// The constraint-factor transport is isometric only for the euclidean
    /// kind; for the other kinds the metric on that factor is preserved only
    /// approximately.
    pub fn transport_isometric(&self, t_dir: &Tangent, t: &Tangent) -> Result<(Point, Tangent)> {
        let h_new = self.kind().retract(&self.h, &t_dir.k)?;
        let v_new = cayley_apply(&self.v, &t_dir.v_p, &self.v)?;
        let target = Point::new(h_new, v_new, self.omega())?;

        let k = target.kind().project_tangent(&target.h, &t.k);
        let (m_sqrt, _) = linalg::spd_sqrt_pair(&self.gram)?;
        let (_, mt_isqrt) = linalg::spd_sqrt_pair(&target.gram)?;
        let v_p = cayley_apply(&self.v, &t_dir.v_p, &(&t.v_p * m_sqrt))? * mt_isqrt;
        Ok((target, Tangent { k, v_p }))
    }
}

/// Applies the Cayley transform `Pi(V, dir)` to `target`, where
/// `Pi = (I - W/2)^{-1} (I + W/2)` and `W = A V^T - V A^T` with
/// `A = (I - V V^T / 2) dir`.
pub fn cayley_apply(v: &Mat, dir: &Mat, target: &Mat) -> Result<Mat> {
    let n = v.nrows();
    let a = dir - v * (v.transpose() * dir) * 0.5;
    let w = &a * v.transpose() - v * a.transpose();
    let lhs = Mat::identity(n, n) - &w * 0.5;
    let rhs = target + &w * target * 0.5;
    lhs.lu().solve(&rhs).ok_or(Error::CayleySingular)
}
