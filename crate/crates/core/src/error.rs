use thiserror::Error;

/// Errors produced by the model, the solvers and the I/O layer.
#[derive(Debug, Error)]
pub enum CrdError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter set violates a model invariant.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The chain has an absorbing boundary or a zero transition rate.
    #[error("chain reducible; stationary distribution not unique ({0})")]
    Reducible(String),
    #[error("power iteration did not converge after {iterations} iterations (L1 residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CrdError>;
