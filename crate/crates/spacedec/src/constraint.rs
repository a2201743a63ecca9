//! Geometry of the orthogonally invariant constraint set and its induced
//! lower-dimensional manifolds.
//!
//! A constraint kind describes a level set `{X : h(X) = 0}` for a smooth map
//! `h` with `h(XQ) = h(X)` for every orthogonal `Q`. Because of that
//! invariance the same formulas apply verbatim to the induced manifolds in
//! `R^{m x s}` for every column count `s`, so one implementation serves both
//! the ambient set and its low-dimensional restrictions.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Feasibility tolerance enforced when constructing points.
pub const FEAS_TOL: f64 = 1e-10;

/// Tangency violation beyond which Hessian inputs are rejected.
pub const TANGENT_TOL: f64 = 1e-8;

/// The four supported orthogonally invariant constraint sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `h = 0`: the whole matrix space.
    Euclidean,
    /// Unit-norm rows: `diag(X X^T) = 1`.
    Oblique,
    /// Unit Frobenius norm: `||X||_F = 1`.
    FrobeniusSphere,
    /// `blocks` stacked row blocks of `block_rows` orthonormal rows each.
    StackedStiefel { blocks: usize, block_rows: usize },
}

impl ConstraintKind {
    /// Parses the string keys used by experiment configs.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "oblique" => Ok(Self::Oblique),
            "fsphere" => Ok(Self::FrobeniusSphere),
            other => {
                if let Some(rest) = other.strip_prefix("stiefel:") {
                    let (k, p) = rest.split_once('x').ok_or_else(|| {
                        Error::InvalidConfig(format!("expected stiefel:<k>x<p>, got {other}"))
                    })?;
                    let blocks = k.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad block count in {other}"))
                    })?;
                    let block_rows = p.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad block size in {other}"))
                    })?;
                    if blocks == 0 || block_rows == 0 {
                        return Err(Error::InvalidConfig("stiefel blocks must be nonzero".into()));
                    }
                    Ok(Self::StackedStiefel { blocks, block_rows })
                } else {
                    Err(Error::InvalidConfig(format!("unknown constraint kind {other}")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Euclidean => "euclidean".into(),
            Self::Oblique => "oblique".into(),
            Self::FrobeniusSphere => "fsphere".into(),
            Self::StackedStiefel { blocks, block_rows } => format!("stiefel:{blocks}x{block_rows}"),
        }
    }

    /// Codomain dimension `q` of the constraint map for `rows` matrix rows.
    pub fn codim(&self, rows: usize) -> usize {
        match self {
            Self::Euclidean => 0,
            Self::Oblique => rows,
            Self::FrobeniusSphere => 1,
            Self::StackedStiefel { blocks, block_rows } => {
                blocks * block_rows * (block_rows + 1) / 2
            }
        }
    }

    /// Dimension of the induced manifold in `R^{rows x cols}`.
    pub fn level_set_dim(&self, rows: usize, cols: usize) -> usize {
        rows * cols - self.codim(rows)
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if let Self::StackedStiefel { blocks, block_rows } = self {
            if blocks * block_rows != rows {
                return Err(Error::InvalidInput(format!(
                    "stacked Stiefel expects {} rows, got {rows}",
                    blocks * block_rows
                )));
            }
        }
        Ok(())
    }

    /// Whether the induced manifold in `R^{rows x cols}` has any points.
    pub fn check_nonempty(&self, rows: usize, cols: usize) -> Result<()> {
        self.check_rows(rows)?;
        if cols == 0 {
            return Err(Error::EmptyManifold("zero columns".into()));
        }
        if let Self::StackedStiefel { block_rows, .. } = self {
            if cols < *block_rows {
                return Err(Error::EmptyManifold(format!(
                    "no {block_rows} orthonormal rows fit in dimension {cols}"
                )));
            }
        }
        Ok(())
    }

    /// Value of the constraint map at `h`, a vector of length `q`.
    pub fn residual(&self, h: &Mat) -> Result<DVector<f64>> {
        self.check_rows(h.nrows())?;
        Ok(match self {
            Self::Euclidean => DVector::zeros(0),
            Self::Oblique => {
                DVector::from_iterator(h.nrows(), h.row_iter().map(|r| r.norm_squared() - 1.0))
            }
            Self::FrobeniusSphere => DVector::from_element(1, h.norm_squared() - 1.0),
            Self::StackedStiefel { blocks, block_rows } => {
                let p = *block_rows;
                let mut out = Vec::with_capacity(self.codim(h.nrows()));
                for b in 0..*blocks {
                    let blk = h.rows(b * p, p);
                    let gram = &blk * blk.transpose();
                    for i in 0..p {
                        for j in i..p {
                            let target = if i == j { 1.0 } else { 0.0 };
                            out.push(gram[(i, j)] - target);
                        }
                    }
                }
                DVector::from_vec(out)
            }
        })
    }

    /// Euclidean norm of the constraint residual.
    pub fn residual_norm(&self, h: &Mat) -> Result<f64> {
        Ok(self.residual(h)?.norm())
    }

    /// Projection onto the tangent space of the level set at `h`.
    pub fn project_tangent(&self, h: &ConstraintPoint, y: &Mat) -> Mat {
        let hm = h.mat();
        debug_assert_eq!(hm.shape(), y.shape());
        match self {
            Self::Euclidean => y.clone(),
            Self::Oblique => {
                let mut out = y.clone();
                for i in 0..hm.nrows() {
                    let c = hm.row(i).dot(&y.row(i));
                    let hrow = hm.row(i).into_owned();
                    let mut row = out.row_mut(i);
                    row -= hrow * c;
                }
                out
            }
            Self::FrobeniusSphere => {
                let c = linalg::frob_inner(hm, y);
                y - hm * c
            }
            Self::StackedStiefel { blocks, block_rows } => {
                let p = *block_rows;
                let mut out = y.clone();
                for b in 0..*blocks {
                    let blk = hm.rows(b * p, p).into_owned();
                    let yb = y.rows(b * p, p).into_owned();
                    let s = linalg::sym_part(&(&yb * blk.transpose())).expect("square");
                    let corr = s * &blk;
                    let mut dst = out.rows_mut(b * p, p);
                    dst -= corr;
                }
                out
            }
        }
    }

    /// Normal component `y - P_T(y)`.
    pub fn project_normal(&self, h: &ConstraintPoint, y: &Mat) -> Mat {
        y - self.project_tangent(h, y)
    }

    /// Metric projection of `y` onto the level set.
    pub fn project_point(&self, y: &Mat) -> Result<ConstraintPoint> {
        self.check_nonempty(y.nrows(), y.ncols())?;
        let mat = match self {
            Self::Euclidean => y.clone(),
            Self::Oblique => {
                let mut out = y.clone();
                for mut row in out.row_iter_mut() {
                    let norm = row.norm();
                    if norm <= 1e-13 {
                        return Err(Error::ProjectionUndefined(
                            "row normalization hit a zero row".into(),
                        ));
                    }
                    row /= norm;
                }
                out
            }
            Self::FrobeniusSphere => {
                let norm = y.norm();
                if norm <= 1e-13 {
                    return Err(Error::ProjectionUndefined(
                        "cannot normalize the zero matrix".into(),
                    ));
                }
                y / norm
            }
            Self::StackedStiefel { blocks, block_rows } => {
                let p = *block_rows;
                let mut out = y.clone();
                for b in 0..*blocks {
                    let blk = y.rows(b * p, p).into_owned();
                    let w = linalg::polar_factor(&blk.transpose()).map_err(|_| {
                        Error::ProjectionUndefined(format!(
                            "row block {b} is rank-deficient"
                        ))
                    })?;
                    out.rows_mut(b * p, p).copy_from(&w.transpose());
                }
                out
            }
        };
        ConstraintPoint::new(*self, mat)
    }

    /// Projection-like retraction `P(h + k)`.
    pub fn retract(&self, h: &ConstraintPoint, k: &Mat) -> Result<ConstraintPoint> {
        if let Self::Euclidean = self {
            return ConstraintPoint::new(*self, h.mat() + k);
        }
        self.project_point(&(h.mat() + k))
    }

    /// Projection-based transport of `k` along direction `k_dir`.
    ///
    /// Returns the retracted base point together with the transported vector.
    pub fn transport(
        &self,
        h: &ConstraintPoint,
        k_dir: &Mat,
        k: &Mat,
    ) -> Result<(ConstraintPoint, Mat)> {
        let target = self.retract(h, k_dir)?;
        let moved = self.project_tangent(&target, k);
        Ok((target, moved))
    }

    /// Riemannian Hessian of `f` on the level set, applied to a tangent `eta`.
    ///
    /// `egrad` and `ehess_eta` are the Euclidean gradient and the Euclidean
    /// Hessian of `f` applied to `eta`, all at the point `h`.
    pub fn ehess_to_rhess(
        &self,
        h: &ConstraintPoint,
        egrad: &Mat,
        ehess_eta: &Mat,
        eta: &Mat,
    ) -> Result<Mat> {
        let violation = (eta - self.project_tangent(h, eta)).norm() / (1.0 + eta.norm());
        if violation > TANGENT_TOL {
            return Err(Error::InvalidTangent(violation));
        }
        let hm = h.mat();
        let corrected = match self {
            Self::Euclidean => return Ok(ehess_eta.clone()),
            Self::Oblique => {
                let mut c = ehess_eta.clone();
                for i in 0..hm.nrows() {
                    let coef = hm.row(i).dot(&egrad.row(i));
                    let erow = eta.row(i).into_owned();
                    let mut row = c.row_mut(i);
                    row -= erow * coef;
                }
                c
            }
            Self::FrobeniusSphere => ehess_eta - eta * linalg::frob_inner(hm, egrad),
            Self::StackedStiefel { blocks, block_rows } => {
                let p = *block_rows;
                let mut c = ehess_eta.clone();
                for b in 0..*blocks {
                    let blk = hm.rows(b * p, p).into_owned();
                    let gb = egrad.rows(b * p, p).into_owned();
                    let s = linalg::sym_part(&(&blk * gb.transpose())).expect("square");
                    let corr = s * eta.rows(b * p, p).into_owned();
                    let mut dst = c.rows_mut(b * p, p);
                    dst -= corr;
                }
                c
            }
        };
        Ok(self.project_tangent(h, &corrected))
    }

    /// Random point, obtained by projecting a Gaussian matrix.
    pub fn random_point<R: Rng + ?Sized>(
        &self,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ConstraintPoint> {
        self.check_nonempty(rows, cols)?;
        self.project_point(&linalg::gaussian(rows, cols, rng))
    }

    /// Random tangent vector at `h`.
    pub fn random_tangent<R: Rng + ?Sized>(&self, h: &ConstraintPoint, rng: &mut R) -> Mat {
        self.project_tangent(h, &linalg::gaussian(h.mat().nrows(), h.mat().ncols(), rng))
    }
}

/// A feasible point of the constraint level set.
#[derive(Debug, Clone)]
pub struct ConstraintPoint {
    kind: ConstraintKind,
    mat: Mat,
}

impl ConstraintPoint {
    /// Validates feasibility to [`FEAS_TOL`].
    pub fn new(kind: ConstraintKind, mat: Mat) -> Result<Self> {
        Self::with_tolerance(kind, mat, FEAS_TOL)
    }

    /// Validates feasibility to a caller-chosen tolerance.
    pub fn with_tolerance(kind: ConstraintKind, mat: Mat, tol: f64) -> Result<Self> {
        kind.check_nonempty(mat.nrows(), mat.ncols())?;
        let res = kind.residual_norm(&mat)?;
        if res > tol {
            return Err(Error::InfeasiblePoint { residual: res });
        }
        Ok(Self { kind, mat })
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Mat {
        Mat::from_row_slice(rows, cols, data)
    }

    fn all_kinds() -> Vec<(ConstraintKind, usize, usize)> {
        vec![
            (ConstraintKind::Euclidean, 6, 4),
            (ConstraintKind::Oblique, 6, 4),
            (ConstraintKind::FrobeniusSphere, 6, 4),
            (
                ConstraintKind::StackedStiefel {
                    blocks: 3,
                    block_rows: 2,
                },
                6,
                4,
            ),
        ]
    }

    #[test]
    fn parse_round_trips() {
        for s in ["euclidean", "oblique", "fsphere", "stiefel:4x3"] {
            let kind = ConstraintKind::parse(s).unwrap();
            assert_eq!(kind.name(), s);
        }
        assert!(ConstraintKind::parse("grassmann").is_err());
        assert!(ConstraintKind::parse("stiefel:4").is_err());
    }

    #[test]
    fn residual_examples() {
        let unit_rows = mat(2, 2, &[0.6, 0.8, 1.0, 0.0]);
        let r = ConstraintKind::Oblique.residual(&unit_rows).unwrap();
        assert!(r.norm() < 1e-14);

        let h = mat(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let scaled = &h * (2.0 / h.norm());
        let r = ConstraintKind::FrobeniusSphere.residual(&scaled).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-12);

        // stacked Stiefel with single-row blocks coincides with oblique
        let kind = ConstraintKind::StackedStiefel {
            blocks: 2,
            block_rows: 1,
        };
        let y = mat(2, 3, &[1.0, 2.0, 2.0, 0.5, 0.5, 0.1]);
        let ob = ConstraintKind::Oblique.residual(&y).unwrap();
        let st = kind.residual(&y).unwrap();
        assert!((ob - st).norm() < 1e-14);
    }

    #[test]
    fn project_tangent_examples() {
        let mut rng = StdRng::seed_from_u64(0);
        let y = linalg::gaussian(3, 2, &mut rng);
        let h = ConstraintKind::Euclidean
            .project_point(&linalg::gaussian(3, 2, &mut rng))
            .unwrap();
        assert!((ConstraintKind::Euclidean.project_tangent(&h, &y) - &y).norm() < 1e-15);

        let h = ConstraintPoint::new(ConstraintKind::Oblique, Mat::identity(2, 2)).unwrap();
        let y = mat(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let p = ConstraintKind::Oblique.project_tangent(&h, &y);
        assert!((p - mat(2, 2, &[0.0, 1.0, 0.0, 0.0])).norm() < 1e-14);

        let h = ConstraintKind::FrobeniusSphere
            .project_point(&linalg::gaussian(3, 2, &mut rng))
            .unwrap();
        let radial = h.mat().clone();
        assert!(ConstraintKind::FrobeniusSphere
            .project_tangent(&h, &radial)
            .norm()
            < 1e-14);
    }

    #[test]
    fn project_point_examples() {
        let mut rng = StdRng::seed_from_u64(1);
        let y = linalg::gaussian(3, 2, &mut rng);
        let scaled = &y * (2.0 / y.norm());
        let p = ConstraintKind::FrobeniusSphere.project_point(&scaled).unwrap();
        assert!((p.mat() - scaled / 2.0).norm() < 1e-12);

        let y = mat(2, 2, &[3.0, 4.0, 0.0, 1.0]);
        let p = ConstraintKind::Oblique.project_point(&y).unwrap();
        assert!((p.mat() - mat(2, 2, &[0.6, 0.8, 0.0, 1.0])).norm() < 1e-12);

        let kind = ConstraintKind::StackedStiefel {
            blocks: 1,
            block_rows: 2,
        };
        let y = mat(2, 3, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        let p = kind.project_point(&y).unwrap();
        assert!((p.mat() - mat(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn degenerate_projections_error() {
        let y = mat(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            ConstraintKind::Oblique.project_point(&y),
            Err(Error::ProjectionUndefined(_))
        ));
        assert!(matches!(
            ConstraintKind::FrobeniusSphere.project_point(&Mat::zeros(2, 2)),
            Err(Error::ProjectionUndefined(_))
        ));
        let kind = ConstraintKind::StackedStiefel {
            blocks: 1,
            block_rows: 2,
        };
        let y = mat(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            kind.project_point(&y),
            Err(Error::ProjectionUndefined(_))
        ));
    }

    #[test]
    fn empty_manifold_detected() {
        let kind = ConstraintKind::StackedStiefel {
            blocks: 2,
            block_rows: 3,
        };
        assert!(matches!(
            kind.check_nonempty(6, 2),
            Err(Error::EmptyManifold(_))
        ));
        let mut rng = StdRng::seed_from_u64(2);
        assert!(matches!(
            kind.random_point(6, 2, &mut rng),
            Err(Error::EmptyManifold(_))
        ));
    }

    #[test]
    fn retract_examples() {
        let mut rng = StdRng::seed_from_u64(3);
        for (kind, m, s) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let back = kind.retract(&h, &Mat::zeros(m, s)).unwrap();
            assert!((back.mat() - h.mat()).norm() < 1e-12, "{}", kind.name());
        }

        let h = ConstraintPoint::new(ConstraintKind::FrobeniusSphere, mat(2, 1, &[1.0, 0.0]))
            .unwrap();
        let k = mat(2, 1, &[0.0, 1.0]);
        let r = ConstraintKind::FrobeniusSphere.retract(&h, &k).unwrap();
        let expect = mat(2, 1, &[1.0, 1.0]) / 2.0_f64.sqrt();
        assert!((r.mat() - expect).norm() < 1e-14);

        let mut rng = StdRng::seed_from_u64(4);
        let h = ConstraintKind::Oblique.random_point(5, 3, &mut rng).unwrap();
        let k = ConstraintKind::Oblique.random_tangent(&h, &mut rng) * 0.3;
        let r = ConstraintKind::Oblique.retract(&h, &k).unwrap();
        for row in r.mat().row_iter() {
            assert!((row.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transport_examples() {
        let mut rng = StdRng::seed_from_u64(5);
        for (kind, m, s) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let k = kind.random_tangent(&h, &mut rng);
            let (_, moved) = kind.transport(&h, &Mat::zeros(m, s), &k).unwrap();
            assert!((moved - &k).norm() < 1e-12, "{}", kind.name());
        }

        // euclidean transport leaves vectors untouched
        let kind = ConstraintKind::Euclidean;
        let mut rng = StdRng::seed_from_u64(6);
        let h = kind.random_point(4, 3, &mut rng).unwrap();
        let k = linalg::gaussian(4, 3, &mut rng);
        let dir = linalg::gaussian(4, 3, &mut rng);
        let (_, moved) = kind.transport(&h, &dir, &k).unwrap();
        assert!((moved - &k).norm() < 1e-15);

        // sphere: transported vector is tangent at the new base
        let kind = ConstraintKind::FrobeniusSphere;
        let h = kind.random_point(4, 3, &mut rng).unwrap();
        let k = kind.random_tangent(&h, &mut rng);
        let dir = kind.random_tangent(&h, &mut rng) * 0.2;
        let (target, moved) = kind.transport(&h, &dir, &k).unwrap();
        assert!(linalg::frob_inner(target.mat(), &moved).abs() < 1e-12);
    }

    #[test]
    fn projection_idempotent_and_self_adjoint() {
        let mut rng = StdRng::seed_from_u64(7);
        for (kind, m, s) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let y = linalg::gaussian(m, s, &mut rng);
            let z = linalg::gaussian(m, s, &mut rng);
            let py = kind.project_tangent(&h, &y);
            let ppy = kind.project_tangent(&h, &py);
            assert!((ppy - &py).norm() <= 1e-12 * (1.0 + py.norm()), "{}", kind.name());
            let pz = kind.project_tangent(&h, &z);
            let lhs = linalg::frob_inner(&py, &z);
            let rhs = linalg::frob_inner(&y, &pz);
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{}", kind.name());
        }
    }

    #[test]
    fn projected_vectors_kill_residual_derivative() {
        let mut rng = StdRng::seed_from_u64(8);
        let t = 1e-6;
        for (kind, m, s) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let y = kind.project_tangent(&h, &linalg::gaussian(m, s, &mut rng));
            let plus = kind.residual(&(h.mat() + &y * t)).unwrap();
            let minus = kind.residual(&(h.mat() - &y * t)).unwrap();
            let deriv = (plus - minus) / (2.0 * t);
            assert!(deriv.norm() <= 1e-6 * (1.0 + y.norm()), "{}", kind.name());
        }
    }

    #[test]
    fn orthogonal_homogeneity_of_retraction() {
        let mut rng = StdRng::seed_from_u64(9);
        for (kind, m, s) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let k = kind.random_tangent(&h, &mut rng) * 0.5;
            let q = linalg::qr_orthonormalize(&linalg::gaussian(s, s, &mut rng)).unwrap();
            let hq = ConstraintPoint::new(kind, h.mat() * &q).unwrap();
            let lhs = kind.retract(&hq, &(&k * &q)).unwrap();
            let rhs = kind.retract(&h, &k).unwrap().into_mat() * &q;
            assert!((lhs.mat() - rhs).norm() <= 1e-12, "{}", kind.name());
        }
    }

    // directions orthogonal to the row space of a feasible point are tangent
    #[test]
    fn row_orthogonal_directions_are_tangent() {
        let mut rng = StdRng::seed_from_u64(10);
        let t = 1e-6;
        for (kind, m, _) in all_kinds() {
            let s = 4;
            let h = kind.random_point(m, s, &mut rng).unwrap();
            // X = H V^T lives in R^{m x n}; pick Y with rows orthogonal to rowspace(X)
            let n = 7;
            let v = linalg::qr_orthonormalize(&linalg::gaussian(n, s, &mut rng)).unwrap();
            let x = h.mat() * v.transpose();
            let c = linalg::gaussian(m, n, &mut rng);
            let y = &c - &c * &v * v.transpose();
            assert!((&x * y.transpose()).norm() < 1e-12);
            let plus = kind.residual(&(&x + &y * t)).unwrap();
            let minus = kind.residual(&(&x - &y * t)).unwrap();
            let deriv = (plus - minus) / (2.0 * t);
            assert!(deriv.norm() <= 1e-6 * (1.0 + y.norm()), "{}", kind.name());
        }
    }

    // ambient tangent projection agrees with its low-dimensional decomposition
    #[test]
    fn ambient_projection_decomposes() {
        let mut rng = StdRng::seed_from_u64(11);
        let (m, s, n) = (6, 3, 8);
        for (kind, _, _) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let v = linalg::qr_orthonormalize(&linalg::gaussian(n, s, &mut rng)).unwrap();
            let x = ConstraintPoint::new(kind, h.mat() * v.transpose()).unwrap();
            let e = linalg::gaussian(m, n, &mut rng);
            let ambient = kind.project_tangent(&x, &e);
            let small = kind.project_tangent(&h, &(&e * &v));
            let decomposed = &small * v.transpose() + &e - &e * &v * v.transpose();
            assert!((ambient - decomposed).norm() <= 1e-10, "{}", kind.name());
        }
    }

    #[test]
    fn rhess_examples() {
        let mut rng = StdRng::seed_from_u64(12);
        let (m, s) = (5, 3);

        // euclidean: identity on the Euclidean Hessian
        let kind = ConstraintKind::Euclidean;
        let h = kind.random_point(m, s, &mut rng).unwrap();
        let eta = linalg::gaussian(m, s, &mut rng);
        let ehess = linalg::gaussian(m, s, &mut rng);
        let out = kind
            .ehess_to_rhess(&h, &linalg::gaussian(m, s, &mut rng), &ehess, &eta)
            .unwrap();
        assert!((out - &ehess).norm() < 1e-15);

        // zero gradient removes the curvature correction
        for (kind, m, s) in all_kinds() {
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let eta = kind.random_tangent(&h, &mut rng);
            let ehess = linalg::gaussian(m, s, &mut rng);
            let out = kind
                .ehess_to_rhess(&h, &Mat::zeros(m, s), &ehess, &eta)
                .unwrap();
            let expect = kind.project_tangent(&h, &ehess);
            assert!((out - expect).norm() <= 1e-12, "{}", kind.name());
        }

        // f = ||X||^2/2 is constant on the sphere, so its Hessian vanishes
        let kind = ConstraintKind::FrobeniusSphere;
        let h = kind.random_point(m, s, &mut rng).unwrap();
        let eta = kind.random_tangent(&h, &mut rng);
        let out = kind
            .ehess_to_rhess(&h, &h.mat().clone(), &eta.clone(), &eta)
            .unwrap();
        assert!(out.norm() <= 1e-12);
    }

    #[test]
    fn rhess_rejects_non_tangent_input() {
        let mut rng = StdRng::seed_from_u64(13);
        let kind = ConstraintKind::FrobeniusSphere;
        let h = kind.random_point(4, 3, &mut rng).unwrap();
        let eta = h.mat().clone(); // radial, far from tangent
        let res = kind.ehess_to_rhess(&h, &Mat::zeros(4, 3), &Mat::zeros(4, 3), &eta);
        assert!(matches!(res, Err(Error::InvalidTangent(_))));
    }

    // <eta, Hess eta> matches the second derivative of f along the
    // projective retraction, which is second order
    #[test]
    fn rhess_matches_curve_second_derivative() {
        let mut rng = StdRng::seed_from_u64(14);
        let (m, s) = (6, 4);
        let target = linalg::gaussian(m, s, &mut rng);
        let amp = linalg::gaussian(m, s, &mut rng) * 0.3;
        let value = |x: &Mat| 0.5 * (x - &target).norm_squared() + amp.dot(&x.map(f64::sin));
        let egrad = |x: &Mat| (x - &target) + amp.component_mul(&x.map(f64::cos));
        let ehess =
            |x: &Mat, d: &Mat| d - amp.component_mul(&x.map(f64::sin)).component_mul(d);

        for (kind, _, _) in all_kinds() {
            if kind == ConstraintKind::Euclidean {
                continue; // projection is the identity; nothing to validate
            }
            let h = kind.random_point(m, s, &mut rng).unwrap();
            let eta = kind.random_tangent(&h, &mut rng);
            let g = egrad(h.mat());
            let he = ehess(h.mat(), &eta);
            let rh = kind.ehess_to_rhess(&h, &g, &he, &eta).unwrap();
            let quad = linalg::frob_inner(&eta, &rh);

            let step = 1e-4;
            let f = |t: f64| {
                let moved = kind.project_point(&(h.mat() + &eta * t)).unwrap();
                value(moved.mat())
            };
            let fd = (f(step) - 2.0 * f(0.0) + f(-step)) / (step * step);
            assert!(
                (fd - quad).abs() <= 1e-4 * (1.0 + quad.abs()),
                "{}: fd {fd} vs quad {quad}",
                kind.name()
            );
        }
    }
}
