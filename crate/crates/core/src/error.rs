use thiserror::Error;

/// Errors raised by the clustering routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("lambda window is empty: largest lower bound {lower} >= upper bound {upper}")]
    EmptyLambdaWindow { lower: f64, upper: f64 },

    #[error("agglomeration violated between grid indices {violations:?}")]
    AgglomerationViolated { violations: Vec<(usize, usize)> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
