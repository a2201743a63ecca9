//! Variational geometry of the nonsmooth feasible set: projections onto the
//! tangent cone of `{rank <= r} ∩ {h = 0}` and the stationarity measures
//! built from them.
//!
//! At a feasible `X` of rank `s` with thin SVD `X = U S V^T` and `H = U S`,
//! the tangent-cone projection of `E` splits into three mutually orthogonal
//! pieces: the constrained part `P_{T_H}(E V) V^T`, the rank-preserving part
//! `P_U E P_{V_perp}`, and a best rank-`(r - s)` approximation of the
//! leftover corner `P_{U_perp} E P_{V_perp}`.

use crate::constraint::{ConstraintKind, ConstraintPoint};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SvdFactors};

/// Feasibility tolerance accepted by the cone toolbox.
pub const CONE_FEAS_TOL: f64 = 1e-8;

/// Rank data of a point, as detected by the crate-wide threshold.
#[derive(Debug, Clone)]
pub struct RankInfo {
    /// Detected numerical rank `s`.
    pub detected_rank: usize,
    /// Rank bound `r` of the variety.
    pub rank_bound: usize,
    /// Thin SVD of the point.
    pub svd: SvdFactors,
}

/// Detects the numerical rank of `x` against the bound `r`.
pub fn rank_info(x: &Mat, r: usize) -> Result<RankInfo> {
    if r > x.nrows().min(x.ncols()) {
        return Err(Error::InvalidInput(format!(
            "rank bound {r} exceeds min({}, {})",
            x.nrows(),
            x.ncols()
        )));
    }
    let svd = linalg::thin_svd(x)?;
    let detected = svd.numerical_rank();
    if detected > r {
        return Err(Error::InvalidInput(format!(
            "numerical rank {detected} exceeds the bound {r}"
        )));
    }
    Ok(RankInfo {
        detected_rank: detected,
        rank_bound: r,
        svd,
    })
}

struct ConeBasis {
    u: Mat, // m x s
    v: Mat, // n x s
    h: Mat, // m x s, equals U * diag(S)
    s: usize,
}

fn cone_basis(info: &RankInfo, forced_rank: usize) -> ConeBasis {
    let s = forced_rank;
    let u = info.svd.u.columns(0, s).into_owned();
    let v = info.svd.v.columns(0, s).into_owned();
    let mut h = u.clone();
    for (j, mut col) in h.column_iter_mut().enumerate() {
        col.scale_mut(info.svd.s[j]);
    }
    ConeBasis { u, v, h, s }
}

/// The three summands of the cone projection, kept separate for testing.
pub struct ConeSplit {
    /// `P_{T_H}(E V) V^T` (or `E P_V` for the unconstrained cone).
    pub constrained: Mat,
    /// `P_U E P_{V_perp}`.
    pub mixed: Mat,
    /// Best rank-`(r - s)` part of `P_{U_perp} E P_{V_perp}`.
    pub corner: Mat,
}

impl ConeSplit {
    pub fn sum(&self) -> Mat {
        &self.constrained + &self.mixed + &self.corner
    }
}

fn split_terms(
    basis: &ConeBasis,
    e: &Mat,
    r: usize,
    kind: Option<(&ConstraintKind, &ConstraintPoint)>,
) -> Result<ConeSplit> {
    let (m, n) = e.shape();
    let s = basis.s;
    let (ev, pu_e) = if s > 0 {
        (e * &basis.v, &basis.u * (basis.u.transpose() * e))
    } else {
        (Mat::zeros(m, 0), Mat::zeros(m, n))
    };
    let constrained = if s == 0 {
        Mat::zeros(m, n)
    } else {
        match kind {
            Some((k, h_pt)) => k.project_tangent(h_pt, &ev) * basis.v.transpose(),
            None => &ev * basis.v.transpose(),
        }
    };
    let e_pv = if s > 0 {
        &ev * basis.v.transpose()
    } else {
        Mat::zeros(m, n)
    };
    let mixed = &pu_e - if s > 0 {
        &basis.u * (basis.u.transpose() * &e_pv)
    } else {
        Mat::zeros(m, n)
    };
    let leftover = e - &e_pv - &pu_e + &basis.u * (basis.u.transpose() * &e_pv);
    let corner = if r > s {
        linalg::truncate_rank(&leftover, (r - s).min(m.min(n)))?
    } else {
        Mat::zeros(m, n)
    };
    Ok(ConeSplit {
        constrained,
        mixed,
        corner,
    })
}

/// Projection of `e` onto the tangent cone of the bounded-rank variety at `x`.
pub fn project_tangent_cone_lowrank(x: &Mat, e: &Mat, r: usize) -> Result<Mat> {
    let info = rank_info(x, r)?;
    let basis = cone_basis(&info, info.detected_rank);
    Ok(split_terms(&basis, e, r, None)?.sum())
}

fn constrained_basis(
    kind: ConstraintKind,
    x: &Mat,
    info: &RankInfo,
    forced_rank: usize,
) -> Result<(ConeBasis, Option<ConstraintPoint>)> {
    let res = kind.residual_norm(x)?;
    if res > CONE_FEAS_TOL {
        return Err(Error::InfeasiblePoint { residual: res });
    }
    let basis = cone_basis(info, forced_rank);
    let h_pt = if basis.s > 0 {
        // H inherits the feasibility of X (up to roundoff in the SVD)
        Some(ConstraintPoint::with_tolerance(
            kind,
            basis.h.clone(),
            (10.0 * res).max(1e-6),
        )?)
    } else {
        None
    };
    Ok((basis, h_pt))
}

/// Split form of the cone projection for the coupled feasible set.
pub fn project_tangent_cone_intersection_split(
    x: &Mat,
    e: &Mat,
    r: usize,
    kind: ConstraintKind,
) -> Result<ConeSplit> {
    let info = rank_info(x, r)?;
    let (basis, h_pt) = constrained_basis(kind, x, &info, info.detected_rank)?;
    split_terms(&basis, e, r, h_pt.as_ref().map(|h| (&kind, h)))
}

/// Projection of `e` onto the tangent cone of `{rank <= r} ∩ {h = 0}` at `x`.
pub fn project_tangent_cone_intersection(
    x: &Mat,
    e: &Mat,
    r: usize,
    kind: ConstraintKind,
) -> Result<Mat> {
    Ok(project_tangent_cone_intersection_split(x, e, r, kind)?.sum())
}

/// Norm of the projected negative gradient at the detected rank.
pub fn stationarity_measure(x: &Mat, egrad: &Mat, r: usize, kind: ConstraintKind) -> Result<f64> {
    let proj = project_tangent_cone_intersection(x, &(-egrad), r, kind)?;
    Ok(proj.norm())
}

/// Stationarity measure computed as if `x` had full rank `r`: the first `r`
/// singular triplets are used regardless of the detected rank. The cone
/// projection is discontinuous in the detected rank, so certification
/// reports both values.
pub fn stationarity_measure_forced(
    x: &Mat,
    egrad: &Mat,
    r: usize,
    kind: ConstraintKind,
) -> Result<f64> {
    let info = rank_info(x, r)?;
    let (basis, h_pt) = constrained_basis(kind, x, &info, r)?;
    let e = -egrad;
    let split = split_terms(&basis, &e, r, h_pt.as_ref().map(|h| (&kind, h)))?;
    Ok(split.sum().norm())
}

/// At a rank-deficient point, stationarity reduces to the negative gradient
/// lying in the normal space of the invariant constraint alone.
pub fn check_rank_deficient_stationarity(
    x: &Mat,
    egrad: &Mat,
    r: usize,
    kind: ConstraintKind,
    tol: f64,
) -> Result<bool> {
    let info = rank_info(x, r)?;
    if info.detected_rank >= r {
        return Err(Error::InvalidInput(format!(
            "point has full rank {}; the reduced test applies below the bound",
            info.detected_rank
        )));
    }
    let res = kind.residual_norm(x)?;
    if res > CONE_FEAS_TOL {
        return Err(Error::InfeasiblePoint { residual: res });
    }
    let x_pt = ConstraintPoint::with_tolerance(kind, x.clone(), (10.0 * res).max(1e-6))?;
    let proj = kind.project_tangent(&x_pt, &(-egrad));
    Ok(proj.norm() <= tol)
}
