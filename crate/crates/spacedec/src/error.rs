//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry kernels, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (dimensions, finiteness, ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A factorization required full (column) rank and did not get it.
    #[error("rank-deficient input: {0}")]
    RankDeficient(String),

    /// The metric projection onto the constraint set is undefined at the input.
    #[error("projection undefined: {0}")]
    ProjectionUndefined(String),

    /// A vector claimed to be tangent fails the tangency residual check.
    #[error("not a tangent vector: residual {0:.3e}")]
    InvalidTangent(f64),

    /// The induced constraint manifold is empty for the requested sizes.
    #[error("empty manifold: {0}")]
    EmptyManifold(String),

    /// The linear solve inside the Cayley transform failed.
    #[error("Cayley transform solve failed")]
    CayleySingular,

    /// A point handed to the variational toolbox is not feasible.
    #[error("infeasible point: constraint residual {residual:.3e}")]
    InfeasiblePoint { residual: f64 },

    /// The similarity iteration cannot start because L maps the seed to zero.
    #[error("degenerate graph pair: L(X0) = 0")]
    DegenerateGraphs,

    /// An experiment configuration is inconsistent or incomplete.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Objective evaluation failed during a solve.
    #[error("objective evaluation failed at iteration {iteration}: {message}")]
    ObjectiveError { iteration: usize, message: String },

    /// Config or matrix file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
