use thiserror::Error;

/// Errors produced by the simulation and analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Two operands disagree in length or shape.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// An iterative numerical method did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
