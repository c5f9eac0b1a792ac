use thiserror::Error;

/// Errors raised by measure constructors, estimators, energies and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input lies outside the mathematical domain of the operation
    /// (non-PSD covariance, non-finite energy, coincident singular particles).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    /// Operation is not available for the given measure parameterization.
    #[error("capability error: {0}")]
    Capability(String),

    /// Inner optimization produced a non-finite objective.
    #[error("inner loop diverged at outer step {step}, epoch {epoch}: {reason}")]
    Diverged {
        step: usize,
        epoch: usize,
        reason: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::NumericDomain(msg.into())
}
