use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed input files.
    #[error("{0}")]
    Usage(String),

    /// The command ran but the outcome counts as a failure.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Domain(_) => 1,
        }
    }
}

impl From<sonclust_core::Error> for CliError {
    fn from(e: sonclust_core::Error) -> Self {
        use sonclust_core::Error as E;
        match e {
            E::EmptyLambdaWindow { .. } | E::AgglomerationViolated { .. } => {
                Self::Domain(e.to_string())
            }
            E::InvalidInput(_) | E::DimensionMismatch { .. } => Self::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
