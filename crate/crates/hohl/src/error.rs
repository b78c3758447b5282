//! Crate-wide error type. Every fallible public operation returns
//! [`Result`]; panics are reserved for internal invariant violations.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument or configuration violated a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A text file failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("solver did not converge after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    /// Conjugate gradients met a direction of non-positive curvature, which
    /// means the operator is not positive definite on the solved subspace.
    /// Distinct from [`Error::NoConvergence`]: restarting will not help.
    #[error("solver breakdown at iteration {iter}: operator is not positive definite")]
    Breakdown { iter: usize },

    /// A pointwise continuum operator was requested where the test function
    /// has a vanishing gradient and the p-Laplacian is singular.
    #[error("singular point: gradient vanishes at the evaluation point")]
    SingularPoint,

    /// Too many benchmark trials failed to solve; the aggregate would be
    /// misleading, so the whole run is rejected.
    #[error("{failed} of {total} trials failed, exceeding the 10% tolerance")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
