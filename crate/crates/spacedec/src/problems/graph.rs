//! Graph similarity scores: the neighborhood-aggregation operator, the
//! normalized fixed-point iteration used as an oracle, and the low-rank
//! objective on the unit Frobenius sphere.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::Objective;
use crate::constraint::ConstraintKind;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::Point;

/// A pair of directed graphs stored as child/parent adjacency lists.
#[derive(Debug, Clone)]
pub struct GraphPair {
    m: usize,
    n: usize,
    a_children: Vec<Vec<usize>>,
    a_parents: Vec<Vec<usize>>,
    b_children: Vec<Vec<usize>>,
    b_parents: Vec<Vec<usize>>,
}

fn adjacency_lists(nodes: usize, edges: &[(usize, usize)]) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let mut children = vec![Vec::new(); nodes];
    let mut parents = vec![Vec::new(); nodes];
    for &(u, v) in edges {
        if u >= nodes || v >= nodes {
            return Err(Error::InvalidInput(format!(
                "edge ({u}, {v}) out of range for {nodes} nodes"
            )));
        }
        children[u].push(v);
        parents[v].push(u);
    }
    Ok((children, parents))
}

impl GraphPair {
    /// Builds the pair from 0-indexed edge lists.
    pub fn from_edges(
        m: usize,
        edges_a: &[(usize, usize)],
        n: usize,
        edges_b: &[(usize, usize)],
    ) -> Result<Self> {
        let (a_children, a_parents) = adjacency_lists(m, edges_a)?;
        let (b_children, b_parents) = adjacency_lists(n, edges_b)?;
        Ok(Self {
            m,
            n,
            a_children,
            a_parents,
            b_children,
            b_parents,
        })
    }

    /// Builds the pair from dense 0/1 adjacency matrices.
    pub fn from_adjacency(a: &Mat, b: &Mat) -> Result<Self> {
        for (what, mat) in [("A", a), ("B", b)] {
            if mat.nrows() != mat.ncols() {
                return Err(Error::InvalidInput(format!("adjacency {what} is not square")));
            }
            if mat.iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::InvalidInput(format!(
                    "adjacency {what} has non-boolean entries"
                )));
            }
        }
        let collect = |mat: &Mat| {
            let mut edges = Vec::new();
            for i in 0..mat.nrows() {
                for j in 0..mat.ncols() {
                    if mat[(i, j)] == 1.0 {
                        edges.push((i, j));
                    }
                }
            }
            edges
        };
        Self::from_edges(a.nrows(), &collect(a), b.nrows(), &collect(b))
    }

    /// Directed cycle on `n` nodes.
    pub fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (i, (i + 1) % n)).collect()
    }

    /// Each ordered pair becomes an edge independently with probability `p`.
    pub fn binomial_edges<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// The similarity operator `L(X) = A X B^T + A^T X B`, applied matrix-free.
    pub fn operator(&self, x: &Mat) -> Result<Mat> {
        if x.shape() != (self.m, self.n) {
            return Err(Error::InvalidInput(format!(
                "operator expects {}x{}, got {}x{}",
                self.m,
                self.n,
                x.nrows(),
                x.ncols()
            )));
        }
        // A X and A^T X
        let mut ax = Mat::zeros(self.m, self.n);
        let mut atx = Mat::zeros(self.m, self.n);
        for i in 0..self.m {
            for &s in &self.a_children[i] {
                let row = x.row(s).into_owned();
                let mut dst = ax.row_mut(i);
                dst += row;
            }
            for &s in &self.a_parents[i] {
                let row = x.row(s).into_owned();
                let mut dst = atx.row_mut(i);
                dst += row;
            }
        }
        // (A X) B^T and (A^T X) B
        let mut out = Mat::zeros(self.m, self.n);
        for j in 0..self.n {
            for &t in &self.b_children[j] {
                let col = ax.column(t).into_owned();
                let mut dst = out.column_mut(j);
                dst += col;
            }
            for &t in &self.b_parents[j] {
                let col = atx.column(t).into_owned();
                let mut dst = out.column_mut(j);
                dst += col;
            }
        }
        Ok(out)
    }

    fn operator_twice(&self, x: &Mat) -> Result<Mat> {
        let lx = self.operator(x)?;
        self.operator(&lx)
    }
}

/// Normalized fixed-point similarity iteration. Runs up to `max_even_steps`
/// double applications of the operator, starting from the normalized all-ones
/// matrix, and returns the even-iterate limit estimate. Stops early when two
/// consecutive even iterates agree to `fp_tol`.
pub fn blondel_similarity(g: &GraphPair, max_even_steps: usize, fp_tol: f64) -> Result<Mat> {
    let (m, n) = (g.rows(), g.cols());
    let mut x = Mat::from_element(m, n, 1.0 / ((m * n) as f64).sqrt());
    for _ in 0..max_even_steps {
        let y = g.operator(&x)?;
        let ny = y.norm();
        if ny == 0.0 {
            return Err(Error::DegenerateGraphs);
        }
        let odd = y / ny;
        let z = g.operator(&odd)?;
        let nz = z.norm();
        if nz == 0.0 {
            return Err(Error::DegenerateGraphs);
        }
        let next = z / nz;
        let diff = (&next - &x).norm();
        x = next;
        if diff <= fp_tol {
            break;
        }
    }
    Ok(x)
}

/// Objective `-<X, L(L(X))>` on the unit Frobenius sphere.
pub fn make_graph_similarity(g: &GraphPair, r: usize) -> Objective {
    let (m, n) = (g.rows(), g.cols());
    let gv = g.clone();
    let value = move |x: &Mat| -linalg::frob_inner(x, &gv.operator_twice(x).expect("shape checked"));
    let gg = g.clone();
    let egrad = move |x: &Mat| gg.operator_twice(x).expect("shape checked") * -2.0;
    let gh = g.clone();
    let ehess = move |_x: &Mat, eta: &Mat| gh.operator_twice(eta).expect("shape checked") * -2.0;
    Objective::new(
        m,
        n,
        ConstraintKind::FrobeniusSphere,
        r,
        Box::new(value),
        Box::new(egrad),
        Some(Box::new(ehess)),
    )
}

/// Rank-`r` representation of the normalized all-ones matrix, the shared
/// starting point of the solvers and the fixed-point oracle.
pub fn similarity_initial_point(m: usize, n: usize, r: usize, omega: f64, seed: u64) -> Result<Point> {
    let ones_dir = Mat::from_element(n, 1, 1.0 / (n as f64).sqrt());
    let v = if r == 1 {
        ones_dir.clone()
    } else {
        let mut rng = StdRng::seed_from_u64(seed);
        let raw = linalg::gaussian(n, r - 1, &mut rng);
        let projected = &raw - &ones_dir * (ones_dir.transpose() * &raw);
        let rest = linalg::qr_orthonormalize(&projected)?;
        let mut v = Mat::zeros(n, r);
        v.set_column(0, &ones_dir.column(0));
        for j in 0..r - 1 {
            v.set_column(j + 1, &rest.column(j));
        }
        v
    };
    let mut h = Mat::zeros(m, r);
    let c = 1.0 / (m as f64).sqrt();
    for i in 0..m {
        h[(i, 0)] = c;
    }
    let h_pt = crate::constraint::ConstraintPoint::new(ConstraintKind::FrobeniusSphere, h)?;
    Point::new(h_pt, v, omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_single_edge_example() {
        // both graphs are the single directed edge 0 -> 1
        let g = GraphPair::from_edges(2, &[(0, 1)], 2, &[(0, 1)]).unwrap();
        let x = Mat::from_element(2, 2, 0.5);
        let lx = g.operator(&x).unwrap();
        let expect = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(lx, expect);
    }

    #[test]
    fn operator_matches_quadruple_loop_exactly() {
        let mut rng = StdRng::seed_from_u64(3);
        for trial in 0..5 {
            let na = 8 + trial;
            let nb = 12 - trial;
            let ea = GraphPair::binomial_edges(na, 0.3, &mut rng);
            let eb = GraphPair::binomial_edges(nb, 0.3, &mut rng);
            let g = GraphPair::from_edges(na, &ea, nb, &eb).unwrap();
            // dyadic rational entries keep both summation orders exact
            let x = Mat::from_fn(na, nb, |_, _| (rng.random_range(-8i32..=8) as f64) / 8.0);

            let mut a = Mat::zeros(na, na);
            for &(u, v) in &ea {
                a[(u, v)] = 1.0;
            }
            let mut b = Mat::zeros(nb, nb);
            for &(u, v) in &eb {
                b[(u, v)] = 1.0;
            }
            let mut direct = Mat::zeros(na, nb);
            for i in 0..na {
                for j in 0..nb {
                    let mut acc = 0.0;
                    for s in 0..na {
                        for t in 0..nb {
                            if a[(i, s)] == 1.0 && b[(j, t)] == 1.0 {
                                acc += x[(s, t)];
                            }
                            if a[(s, i)] == 1.0 && b[(t, j)] == 1.0 {
                                acc += x[(s, t)];
                            }
                        }
                    }
                    direct[(i, j)] = acc;
                }
            }
            assert_eq!(g.operator(&x).unwrap(), direct);
        }
    }

    #[test]
    fn operator_is_self_adjoint() {
        let mut rng = StdRng::seed_from_u64(5);
        let ea = GraphPair::binomial_edges(10, 0.25, &mut rng);
        let eb = GraphPair::binomial_edges(9, 0.25, &mut rng);
        let g = GraphPair::from_edges(10, &ea, 9, &eb).unwrap();
        let x = linalg::gaussian(10, 9, &mut rng);
        let y = linalg::gaussian(10, 9, &mut rng);
        let lhs = linalg::frob_inner(&g.operator(&x).unwrap(), &y);
        let rhs = linalg::frob_inner(&x, &g.operator(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn empty_graphs_give_zero_and_degenerate_iteration() {
        let g = GraphPair::from_edges(3, &[], 3, &[]).unwrap();
        let x = Mat::from_element(3, 3, 1.0);
        assert_eq!(g.operator(&x).unwrap().norm(), 0.0);
        assert!(matches!(
            blondel_similarity(&g, 10, 1e-12),
            Err(Error::DegenerateGraphs)
        ));
    }

    #[test]
    fn iteration_single_edge_first_step() {
        let g = GraphPair::from_edges(2, &[(0, 1)], 2, &[(0, 1)]).unwrap();
        // X0 = ones/2, one application: L(X0)/||L(X0)|| = diag(1/sqrt(2))
        let x0 = Mat::from_element(2, 2, 0.5);
        let y = g.operator(&x0).unwrap();
        let x1 = &y / y.norm();
        let c = 1.0 / 2.0_f64.sqrt();
        let expect = Mat::from_row_slice(2, 2, &[c, 0.0, 0.0, c]);
        assert!((x1 - expect).norm() <= 1e-14);
    }

    #[test]
    fn iteration_output_is_normalized_and_converges() {
        let mut rng = StdRng::seed_from_u64(7);
        let ea = GraphPair::cycle_edges(20);
        let eb = GraphPair::binomial_edges(20, 0.1, &mut rng);
        let g = GraphPair::from_edges(20, &ea, 20, &eb).unwrap();
        let x = blondel_similarity(&g, 2000, 1e-13).unwrap();
        assert!((x.norm() - 1.0).abs() <= 1e-12);
        // converged: one more even step moves nothing
        let y = g.operator(&x).unwrap();
        let odd = &y / y.norm();
        let z = g.operator(&odd).unwrap();
        let next = &z / z.norm();
        assert!((next - &x).norm() <= 1e-12);
    }

    #[test]
    fn similarity_objective_basics() {
        let mut rng = StdRng::seed_from_u64(9);
        let ea = GraphPair::cycle_edges(8);
        let eb = GraphPair::binomial_edges(8, 0.3, &mut rng);
        let g = GraphPair::from_edges(8, &ea, 8, &eb).unwrap();
        let obj = make_graph_similarity(&g, 2);
        assert_eq!(obj.value(&Mat::zeros(8, 8)), 0.0);
        obj.validate_derivatives(5, 11).unwrap();
    }

    #[test]
    fn ones_initial_point_embeds_exactly() {
        for r in [1, 3] {
            let p = similarity_initial_point(6, 8, r, 1.0, 13).unwrap();
            let x = p.embed_x();
            let expect = Mat::from_element(6, 8, 1.0 / 48.0_f64.sqrt());
            assert!((x - expect).norm() <= 1e-12);
        }
    }
}
