use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A Cholesky pivot fell below the positivity threshold.
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index}, threshold {threshold:e})")]
    NotPositiveDefinite { index: usize, pivot: f64, threshold: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    QuadratureNotConverged { subdivisions: usize, estimate: f64, error: f64 },

    #[error("polynomial degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    #[error("value has imaginary residue {0:e}")]
    NonReal(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
