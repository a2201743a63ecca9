//! Low-rank model reduction of Markov chains through the Hadamard square
//! parameterization of the transition matrix.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::Objective;
use crate::constraint::ConstraintKind;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::Point;

/// Synthetic Markov reduction instance.
#[derive(Debug, Clone)]
pub struct MarkovData {
    /// Unit-row factor `Y` with ground-truth transition matrix `Y ⊙ Y`.
    pub truth_factor: Mat,
    /// Empirical transition matrix (row-stochastic).
    pub p_hat: Mat,
    /// Objective value at the ground-truth factor.
    pub truth_value: f64,
}

fn multinomial_row<R: Rng + ?Sized>(probs: &[f64], draws: usize, rng: &mut R) -> Vec<f64> {
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let total = acc;
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..draws {
        let u = rng.random::<f64>() * total;
        let idx = cum.partition_point(|&c| c < u).min(probs.len() - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .map(|c| c as f64 / draws as f64)
        .collect()
}

/// Builds a Markov reduction instance with `states` states and a rank-`r*`
/// aggregatable ground truth: states fall into `r*` groups sharing a random
/// transition profile, so the transition matrix has rank `r*` and a unit-row
/// Hadamard factor. `noise` is the per-entry sampling scale: the empirical
/// matrix is estimated from `round(noise^-2)` multinomial draws per row,
/// and `noise = 0` keeps the exact transition matrix.
pub fn make_markov(
    states: usize,
    r_star: usize,
    noise: f64,
    seed: u64,
) -> Result<(MarkovData, Objective)> {
    if r_star == 0 || r_star > states {
        return Err(Error::InvalidConfig(format!(
            "true rank {r_star} out of range for {states} states"
        )));
    }
    if noise < 0.0 {
        return Err(Error::InvalidConfig("noise must be nonnegative".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    // random surjective cluster assignment
    let mut assign: Vec<usize> = (0..states).map(|i| i % r_star).collect();
    for i in 0..states {
        let j = rng.random_range(0..states);
        assign.swap(i, j);
    }
    // random row-stochastic profile per cluster
    let mut profiles = Mat::zeros(r_star, states);
    for c in 0..r_star {
        let row: Vec<f64> = (0..states).map(|_| rng.random::<f64>().powi(2)).collect();
        let total: f64 = row.iter().sum();
        for (j, v) in row.iter().enumerate() {
            profiles[(c, j)] = v / total;
        }
    }
    let p = Mat::from_fn(states, states, |i, j| profiles[(assign[i], j)]);
    let y = p.map(f64::sqrt);

    let p_hat = if noise == 0.0 {
        p.clone()
    } else {
        let draws = (noise.powi(-2)).round() as usize;
        let mut est = Mat::zeros(states, states);
        for i in 0..states {
            let probs: Vec<f64> = p.row(i).iter().copied().collect();
            let sampled = multinomial_row(&probs, draws, &mut rng);
            let total: f64 = sampled.iter().sum();
            for (j, v) in sampled.into_iter().enumerate() {
                est[(i, j)] = v / total;
            }
        }
        est
    };

    let truth_value = 0.5 * (&p - &p_hat).norm_squared();
    let data = MarkovData {
        truth_factor: y,
        p_hat: p_hat.clone(),
        truth_value,
    };

    let ph_v = p_hat.clone();
    let value = move |x: &Mat| 0.5 * (x.component_mul(x) - &ph_v).norm_squared();
    let ph_g = p_hat.clone();
    let egrad = move |x: &Mat| {
        let resid = x.component_mul(x) - &ph_g;
        x.component_mul(&resid) * 2.0
    };
    let ph_h = p_hat;
    let ehess = move |x: &Mat, eta: &Mat| {
        let resid = x.component_mul(x) - &ph_h;
        eta.component_mul(&resid) * 2.0 + x.component_mul(x).component_mul(eta) * 4.0
    };

    let obj = Objective::new(
        states,
        states,
        ConstraintKind::Oblique,
        r_star,
        Box::new(value),
        Box::new(egrad),
        Some(Box::new(ehess)),
    );
    Ok((data, obj))
}

/// Spectral start: the elementwise square root of the empirical matrix is
/// truncated to rank `r` and its row factor normalized back onto the unit
/// rows. Computable from the observed data alone.
pub fn markov_initial_point(data: &MarkovData, r: usize, omega: f64) -> Result<Point> {
    let z = data.p_hat.map(f64::sqrt);
    let fac = linalg::truncated_factors(&z, r)?;
    let mut us = fac.u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col.scale_mut(fac.s[j]);
    }
    let h = ConstraintKind::Oblique.project_point(&us)?;
    Point::new(h, fac.v.clone(), omega)
}

/// Random unit-row start with a random orthonormal frame.
pub fn markov_random_point(states: usize, r: usize, omega: f64, seed: u64) -> Result<Point> {
    let mut rng = StdRng::seed_from_u64(seed.wrapping_add(1));
    let h = ConstraintKind::Oblique.project_point(&linalg::gaussian(states, r, &mut rng))?;
    let v = linalg::qr_orthonormalize(&linalg::gaussian(states, r, &mut rng))?;
    Point::new(h, v, omega)
}
