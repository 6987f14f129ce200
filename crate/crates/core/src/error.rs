//! Error type shared by every module.

use thiserror::Error;

/// Failures reported by the library. Invalid inputs map to CLI exit code 2,
/// failed verifications to exit code 1.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid monic parameter system: {0}")]
    InvalidMps(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("not admissible: {0}")]
    NotAdmissible(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by malformed configuration rather than a failed check.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Verification(_))
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn verification<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Verification(msg.into()))
}
