use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input (dimension mismatch, non-finite point, bad parameter).
    #[error("input error: {0}")]
    Input(String),
    /// The model cannot provide the requested evaluator.
    #[error("capability error: {0}")]
    Capability(String),
    /// A solver, bracket or quadrature failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Too many samples were unusable for a Monte-Carlo estimate.
    #[error("data-quality error: {0}")]
    DataQuality(String),
    /// A scan grid did not bracket the quantity of interest.
    #[error("range error: {0}")]
    Range(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
