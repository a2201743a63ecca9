//! Dense factorization kernels shared by the geometric operations.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` and is a pure function
//! of its inputs. The numerical rank convention used throughout the crate is
//! `sigma_i > max(m, n) * eps * sigma_1` with `eps = 2^-52`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense matrix type used across the crate.
pub type Mat = DMatrix<f64>;

/// Relative singular-value threshold below which a direction counts as null.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Thin singular value decomposition `A = U diag(S) V^T`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `m x s` with orthonormal columns, `s = min(m, n)`.
    pub u: Mat,
    /// Nonincreasing, nonnegative singular values of length `s`.
    pub s: DVector<f64>,
    /// `n x s` with orthonormal columns.
    pub v: Mat,
}

impl SvdFactors {
    /// Reassembles `U diag(S) V^T`.
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col.scale_mut(self.s[j]);
        }
        us * self.v.transpose()
    }

    /// Number of singular values above `max(m, n) * eps * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        let m = self.u.nrows();
        let n = self.v.nrows();
        let tol = (m.max(n) as f64) * f64::EPSILON * self.s.max();
        self.s.iter().filter(|&&sv| sv > tol).count()
    }
}

fn check_finite(a: &Mat, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Thin SVD with singular values sorted nonincreasing.
///
/// The bidiagonalization-based factorization is validated against the input
/// and a one-sided Jacobi sweep takes over when it fails to reconstruct; the
/// fast path misconverges on a small fraction of exactly rank-deficient
/// inputs, which this crate produces routinely.
pub fn thin_svd(a: &Mat) -> Result<SvdFactors> {
    check_finite(a, "SVD input")?;
    let svd = a.clone().svd(true, true);
    let fast = SvdFactors {
        u: svd.u.expect("u requested"),
        s: svd.singular_values,
        v: svd.v_t.expect("v_t requested").transpose(),
    };
    let scale = a.norm();
    let tol = 50.0 * f64::EPSILON * (a.nrows().max(a.ncols()) as f64) * (1.0 + scale);
    if (fast.reconstruct() - a).norm() <= tol {
        return Ok(fast);
    }
    Ok(jacobi_svd(a))
}

/// One-sided Jacobi SVD. Slower than the bidiagonal route but reliable on
/// rank-deficient inputs.
fn jacobi_svd(a: &Mat) -> SvdFactors {
    let transposed = a.nrows() < a.ncols();
    let mut b = if transposed { a.transpose() } else { a.clone() };
    let (m, n) = (b.nrows(), b.ncols());
    let mut vacc = Mat::identity(n, n);

    let tol = 1e-15;
    for _ in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let ci = b.column(i).into_owned();
                let cj = b.column(j).into_owned();
                let aa = ci.norm_squared();
                let bb = cj.norm_squared();
                let g = ci.dot(&cj);
                let denom = (aa * bb).sqrt();
                if denom == 0.0 || g.abs() <= tol * denom {
                    continue;
                }
                off = off.max(g.abs() / denom);
                let zeta = (bb - aa) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                b.set_column(i, &(&ci * c - &cj * s));
                b.set_column(j, &(&ci * s + &cj * c));
                let vi = vacc.column(i).into_owned();
                let vj = vacc.column(j).into_owned();
                vacc.set_column(i, &(&vi * c - &vj * s));
                vacc.set_column(j, &(&vi * s + &vj * c));
            }
        }
        if off <= tol {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| b.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Mat::zeros(m, n);
    let mut v = Mat::zeros(n, n);
    let mut s = DVector::zeros(n);
    let smax = norms.iter().cloned().fold(0.0, f64::max);
    let null_tol = smax * f64::EPSILON * (m.max(n) as f64);
    let mut null_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        v.set_column(dst, &vacc.column(src));
        if norms[src] > null_tol && norms[src] > 0.0 {
            u.set_column(dst, &(b.column(src) / norms[src]));
        } else {
            null_cols.push(dst);
        }
    }
    // orthonormal completion for the null directions
    for dst in null_cols {
        let mut picked = None;
        for basis in 0..m {
            let mut cand = Mat::zeros(m, 1);
            cand[(basis, 0)] = 1.0;
            for _pass in 0..2 {
                for j in 0..n {
                    if j == dst {
                        continue;
                    }
                    let proj = u.column(j).dot(&cand.column(0));
                    let col = u.column(j).into_owned();
                    cand.set_column(0, &(cand.column(0) - col * proj));
                }
            }
            let norm = cand.column(0).norm();
            if norm > 0.5 {
                picked = Some(cand / norm);
                break;
            }
        }
        let cand = picked.expect("orthonormal completion exists");
        u.set_column(dst, &cand.column(0));
    }

    if transposed {
        SvdFactors { u: v, s, v: u }
    } else {
        SvdFactors { u, s, v }
    }
}

/// Best Frobenius approximation of `a` by a matrix of rank at most `k`.
pub fn truncate_rank(a: &Mat, k: usize) -> Result<Mat> {
    if k > a.nrows().min(a.ncols()) {
        return Err(Error::InvalidInput(format!(
            "rank bound {k} exceeds min({}, {})",
            a.nrows(),
            a.ncols()
        )));
    }
    if k == 0 {
        return Ok(Mat::zeros(a.nrows(), a.ncols()));
    }
    let f = thin_svd(a)?;
    let uk = f.u.columns(0, k).into_owned();
    let vk = f.v.columns(0, k).into_owned();
    let mut us = uk;
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col.scale_mut(f.s[j]);
    }
    Ok(us * vk.transpose())
}

/// Rank-`k` truncation returned in factored form `(U_k, S_k, V_k)`.
pub fn truncated_factors(a: &Mat, k: usize) -> Result<SvdFactors> {
    if k > a.nrows().min(a.ncols()) {
        return Err(Error::InvalidInput(format!("rank bound {k} out of range")));
    }
    let f = thin_svd(a)?;
    Ok(SvdFactors {
        u: f.u.columns(0, k).into_owned(),
        s: DVector::from_iterator(k, f.s.iter().take(k).copied()),
        v: f.v.columns(0, k).into_owned(),
    })
}

/// Orthonormal polar factor `W = L (L^T L)^{-1/2}` of a full-column-rank `L`.
pub fn polar_factor(l: &Mat) -> Result<Mat> {
    let f = thin_svd(l)?;
    let smax = f.s.max();
    let smin = f.s.min();
    if l.nrows() < l.ncols() || smin <= RANK_REL_TOL * smax {
        return Err(Error::RankDeficient(format!(
            "polar factor needs full column rank (sigma_min/sigma_max = {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    Ok(&f.u * f.v.transpose())
}

/// Orthonormal basis of the column space of `a`, via QR.
pub fn qr_orthonormalize(a: &Mat) -> Result<Mat> {
    check_finite(a, "QR input")?;
    if a.nrows() < a.ncols() {
        return Err(Error::RankDeficient(format!(
            "cannot orthonormalize {} columns in dimension {}",
            a.ncols(),
            a.nrows()
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let dmax = (0..a.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..a.ncols()).any(|i| r[(i, i)].abs() <= RANK_REL_TOL * dmax) || dmax == 0.0 {
        return Err(Error::RankDeficient(
            "QR orthonormalization hit a rank-deficient column".into(),
        ));
    }
    Ok(qr.q())
}

/// Symmetric part `(M + M^T) / 2` of a square matrix.
pub fn sym_part(m: &Mat) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "sym expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Symmetric square root and inverse square root of an SPD matrix.
pub fn spd_sqrt_pair(m: &Mat) -> Result<(Mat, Mat)> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidInput(
            "matrix is not positive definite".into(),
        ));
    }
    let q = &eig.eigenvectors;
    let sqrt_d = Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let isqrt_d = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok((q * sqrt_d * q.transpose(), q * isqrt_d * q.transpose()))
}

/// Matrix of i.i.d. standard normal entries.
pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Frobenius inner product.
pub fn frob_inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}
