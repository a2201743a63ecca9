//! Rotation synchronization from relative measurements, posed as a low-rank
//! problem over stacked orthonormal blocks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::Objective;
use crate::constraint::{ConstraintKind, ConstraintPoint};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::Point;

/// Synthetic synchronization instance.
#[derive(Debug, Clone)]
pub struct SyncData {
    pub n_cams: usize,
    pub edges: Vec<(usize, usize)>,
    /// Relative measurements, one per edge, approximately `R_j R_i^T`.
    pub measurements: Vec<Mat>,
    /// Ground-truth absolute rotations.
    pub truth: Vec<Mat>,
    /// Symmetric cost matrix with blocks `C_ij = -measurement^T`.
    pub cost: Mat,
}

impl SyncData {
    /// Per-edge errors `||H_j H_i^T - measurement||_F` for the row blocks of
    /// `h`. Gauge-invariant: a shared right factor cancels.
    pub fn edge_errors(&self, h: &Mat) -> Vec<f64> {
        self.edges
            .iter()
            .zip(&self.measurements)
            .map(|(&(i, j), meas)| {
                let hi = h.rows(3 * i, 3).into_owned();
                let hj = h.rows(3 * j, 3).into_owned();
                (hj * hi.transpose() - meas).norm()
            })
            .collect()
    }

    /// Objective value at the ground-truth configuration.
    pub fn truth_value(&self) -> f64 {
        let mut h = Mat::zeros(3 * self.n_cams, 3);
        for (i, r) in self.truth.iter().enumerate() {
            h.rows_mut(3 * i, 3).copy_from(r);
        }
        linalg::frob_inner(&self.cost, &(&h * h.transpose()))
    }

    /// Determinants of the 3x3 row blocks of `h`.
    pub fn block_determinants(h: &Mat) -> Vec<f64> {
        (0..h.nrows() / 3)
            .map(|i| h.rows(3 * i, 3).into_owned().determinant())
            .collect()
    }
}

/// Rodrigues formula for the rotation with axis-angle vector `w`.
fn exp_so3(w: [f64; 3]) -> Mat {
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let k = Mat::from_row_slice(
        3,
        3,
        &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0],
    );
    if theta < 1e-12 {
        return Mat::identity(3, 3) + k;
    }
    let k2 = &k * &k;
    Mat::identity(3, 3) + &k * (theta.sin() / theta) + k2 * ((1.0 - theta.cos()) / (theta * theta))
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat {
    let q = linalg::qr_orthonormalize(&linalg::gaussian(3, 3, rng)).expect("full rank a.s.");
    if q.determinant() < 0.0 {
        let mut fixed = q;
        let col = -fixed.column(2).into_owned();
        fixed.set_column(2, &col.column(0));
        fixed
    } else {
        q
    }
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut comps = n;
    for &(u, v) in edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            comps -= 1;
        }
    }
    comps == 1
}

/// Builds a synchronization instance on a random measurement graph with
/// connection probability `connectivity_p` (the edge count is
/// `round(p * n(n-1)/2)`, resampled until connected). Measurements are
/// `R_j R_i^T` composed with a rotation of axis-angle scale `noise_sigma`.
pub fn make_synchronization(
    n_cams: usize,
    noise_sigma: f64,
    connectivity_p: f64,
    seed: u64,
) -> Result<(SyncData, Objective)> {
    if n_cams < 2 {
        return Err(Error::InvalidConfig("need at least two cameras".into()));
    }
    let total_pairs = n_cams * (n_cams - 1) / 2;
    let edge_count = ((connectivity_p * total_pairs as f64).round() as usize).min(total_pairs);
    if edge_count < n_cams - 1 {
        return Err(Error::InvalidConfig(format!(
            "{edge_count} edges cannot connect {n_cams} cameras"
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let all_pairs: Vec<(usize, usize)> = (0..n_cams)
        .flat_map(|i| ((i + 1)..n_cams).map(move |j| (i, j)))
        .collect();

    let mut edges = Vec::new();
    let mut ok = false;
    for _ in 0..50 {
        let picks = rand::seq::index::sample(&mut rng, total_pairs, edge_count);
        edges = picks.iter().map(|k| all_pairs[k]).collect();
        if connected(n_cams, &edges) {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::InvalidConfig(
            "measurement graph stayed disconnected after 50 attempts".into(),
        ));
    }

    let truth: Vec<Mat> = (0..n_cams).map(|_| random_rotation(&mut rng)).collect();
    let dim = 3 * n_cams;
    let mut cost = Mat::zeros(dim, dim);
    let mut measurements = Vec::with_capacity(edges.len());
    for &(i, j) in &edges {
        let noise = exp_so3([
            noise_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
            noise_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
            noise_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
        ]);
        let rel = &truth[j] * truth[i].transpose() * noise;
        cost.view_mut((3 * i, 3 * j), (3, 3))
            .copy_from(&(-rel.transpose()));
        cost.view_mut((3 * j, 3 * i), (3, 3)).copy_from(&(-&rel));
        measurements.push(rel);
    }

    let data = SyncData {
        n_cams,
        edges,
        measurements,
        truth,
        cost: cost.clone(),
    };

    let c_v = cost.clone();
    let value = move |x: &Mat| linalg::frob_inner(&c_v, &(x * x.transpose()));
    let c_g = cost.clone();
    let egrad = move |x: &Mat| (&c_g + c_g.transpose()) * x;
    let c_h = cost;
    let ehess = move |_x: &Mat, eta: &Mat| (&c_h + c_h.transpose()) * eta;

    let kind = ConstraintKind::StackedStiefel {
        blocks: n_cams,
        block_rows: 3,
    };
    let obj = Objective::new(
        dim,
        dim,
        kind,
        3,
        Box::new(value),
        Box::new(egrad),
        Some(Box::new(ehess)),
    );
    Ok((data, obj))
}

/// Random start: independent rotations for the blocks of `H`, random
/// orthonormal `V`.
pub fn sync_initial_point(n_cams: usize, omega: f64, seed: u64) -> Result<Point> {
    let mut rng = StdRng::seed_from_u64(seed.wrapping_add(1));
    let dim = 3 * n_cams;
    let mut h = Mat::zeros(dim, 3);
    for i in 0..n_cams {
        h.rows_mut(3 * i, 3).copy_from(&random_rotation(&mut rng));
    }
    let kind = ConstraintKind::StackedStiefel {
        blocks: n_cams,
        block_rows: 3,
    };
    let h_pt = ConstraintPoint::new(kind, h)?;
    let v = linalg::qr_orthonormalize(&linalg::gaussian(dim, 3, &mut rng))?;
    Point::new(h_pt, v, omega)
}
