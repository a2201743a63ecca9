//! Riemannian optimization over bounded-rank matrices with orthogonally
//! invariant equality constraints.
//!
//! The feasible set `{X : rank(X) <= r, h(X) = 0}` is nonsmooth, but for an
//! orthogonally invariant `h` it is the image of a smooth manifold of pairs
//! `(X, G)` with `X G = 0`, where the projector `G` carries the rank
//! information and `X` carries the constraint. This crate implements that
//! parameterization together with:
//!
//! - the geometry of the four shipped constraint sets ([`constraint`]):
//!   the whole space, unit-norm rows, the unit Frobenius sphere, and stacked
//!   orthonormal row blocks;
//! - metric, projections, gradient, Hessian, first- and second-order
//!   retractions and three vector transports on the decoupled manifold
//!   ([`manifold`]);
//! - tangent-cone projections and stationarity measures for the original
//!   nonsmooth problem, used to certify solutions ([`variational`]);
//! - Riemannian gradient descent and trust-region solvers ([`solver`]);
//! - objective builders and synthetic data generators for spherical data
//!   fitting, graph similarity scoring, rotation synchronization and
//!   Hadamard-parameterized Markov models ([`problems`]);
//! - a property-check suite ([`diagnostics`]) and a small experiment harness
//!   ([`cli`]) with MatrixMarket, CSV and JSON output ([`io`]).
//!
//! The runnable programs under `examples/` demonstrate each capability; the
//! `spacedec` binary drives experiments from config files.

pub mod cli;
pub mod config;
pub mod constraint;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod problems;
pub mod solver;
pub mod variational;

pub use constraint::{ConstraintKind, ConstraintPoint};
pub use error::{Error, Result};
pub use linalg::Mat;
pub use manifold::{MetricWeight, Point, RetractionChoice, StiefelRule, Tangent};
