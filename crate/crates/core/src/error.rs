use thiserror::Error;

/// Errors raised by the estimators, samplers and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbcError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampler startup failed: {0}")]
    Startup(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid data: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, AbcError>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(AbcError::Dimension { expected, found })
    }
}
