//! Masked low-rank fitting of unit-row data points.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::Objective;
use crate::constraint::ConstraintKind;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::Point;

/// Synthetic fitting instance: unit-row target, observation and test masks.
#[derive(Debug, Clone)]
pub struct MaskedFittingData {
    pub target: Mat,
    pub mask: Vec<(usize, usize)>,
    pub test_mask: Vec<(usize, usize)>,
    pub true_rank: usize,
}

impl MaskedFittingData {
    /// Relative error on the held-out entries.
    pub fn test_error(&self, x: &Mat) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for &(i, j) in &self.test_mask {
            let d = x[(i, j)] - self.target[(i, j)];
            num += d * d;
            den += self.target[(i, j)] * self.target[(i, j)];
        }
        (num / den).sqrt()
    }
}

/// Builds a fitting instance with `|mask| = round(os * r* * (m + n - r*))`
/// observed entries and an equally large disjoint test mask.
pub fn make_fitting(
    m: usize,
    n: usize,
    r_star: usize,
    oversampling: f64,
    seed: u64,
) -> Result<(MaskedFittingData, Objective)> {
    if r_star == 0 || r_star > m.min(n) {
        return Err(Error::InvalidConfig(format!(
            "true rank {r_star} out of range for {m}x{n}"
        )));
    }
    let budget = (oversampling * (r_star * (m + n - r_star)) as f64).round() as usize;
    if budget == 0 || 2 * budget > m * n {
        return Err(Error::InvalidConfig(format!(
            "sampling budget {budget} does not leave room for a disjoint test mask in {m}x{n}"
        )));
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let u = linalg::qr_orthonormalize(&linalg::gaussian(m, r_star, &mut rng))?;
    let v = linalg::qr_orthonormalize(&linalg::gaussian(n, r_star, &mut rng))?;
    let mut us = u;
    for mut col in us.column_iter_mut() {
        col.scale_mut(rng.random::<f64>());
    }
    let rows = ConstraintKind::Oblique.project_point(&us)?;
    let target = rows.mat() * v.transpose();

    let picks = rand::seq::index::sample(&mut rng, m * n, 2 * budget);
    let to_pair = |flat: usize| (flat / n, flat % n);
    let mask: Vec<_> = picks.iter().take(budget).map(to_pair).collect();
    let test_mask: Vec<_> = picks.iter().skip(budget).map(to_pair).collect();

    let data = MaskedFittingData {
        target: target.clone(),
        mask: mask.clone(),
        test_mask,
        true_rank: r_star,
    };

    let (tm, tn) = (m, n);
    let target_v = target.clone();
    let mask_v = mask.clone();
    let value = move |x: &Mat| {
        let mut acc = 0.0;
        for &(i, j) in &mask_v {
            let d = x[(i, j)] - target_v[(i, j)];
            acc += d * d;
        }
        0.5 * acc
    };
    let target_g = target;
    let mask_g = mask.clone();
    let egrad = move |x: &Mat| {
        let mut g = Mat::zeros(tm, tn);
        for &(i, j) in &mask_g {
            g[(i, j)] = x[(i, j)] - target_g[(i, j)];
        }
        g
    };
    let mask_h = mask;
    let ehess = move |_x: &Mat, eta: &Mat| {
        let mut out = Mat::zeros(tm, tn);
        for &(i, j) in &mask_h {
            out[(i, j)] = eta[(i, j)];
        }
        out
    };

    let obj = Objective::new(
        m,
        n,
        ConstraintKind::Oblique,
        r_star,
        Box::new(value),
        Box::new(egrad),
        Some(Box::new(ehess)),
    );
    Ok((data, obj))
}

/// Starting point: random unit-row `H` when `r = r*`, otherwise `r` random
/// columns of the target, row-normalized. `V` is a random orthonormal frame.
pub fn fitting_initial_point(
    data: &MaskedFittingData,
    r: usize,
    omega: f64,
    seed: u64,
) -> Result<Point> {
    let (m, n) = data.target.shape();
    let mut rng = StdRng::seed_from_u64(seed.wrapping_add(1));
    let h_raw = if r == data.true_rank {
        linalg::gaussian(m, r, &mut rng)
    } else {
        let cols = rand::seq::index::sample(&mut rng, n, r);
        let mut h = Mat::zeros(m, r);
        for (dst, src) in cols.iter().enumerate() {
            h.set_column(dst, &data.target.column(src));
        }
        h
    };
    let h = ConstraintKind::Oblique.project_point(&h_raw)?;
    let v = linalg::qr_orthonormalize(&linalg::gaussian(n, r, &mut rng))?;
    Point::new(h, v, omega)
}
