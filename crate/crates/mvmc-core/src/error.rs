//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by dataset construction, preprocessing, solvers and metrics.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix / vector shapes do not line up, or an index is out of range.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter or input value violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A requested metric is undefined on the given data
    /// (e.g. average precision with no positive ground-truth entries).
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// An iterative solver diverged or produced non-finite values.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A dense linear-algebra routine (SVD / eigendecomposition) failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::SolverFailure(msg.into())
    }
}
