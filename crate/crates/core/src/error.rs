//! Crate-wide error type.
//!
//! Variants map onto the failure categories the CLI turns into distinct
//! exit codes: configuration problems, bad inputs, and runtime failures.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or image dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A precondition on an operation input was violated.
    #[error("invalid input: {0}")]
    Input(String),

    /// A non-finite value appeared in a numeric pipeline.
    #[error("non-finite value in {0}")]
    Numeric(String),

    /// A mask/caption provider returned something that violates its contract.
    #[error("provider error: {0}")]
    Provider(String),

    /// Scene generation could not satisfy its constraints.
    #[error("generation failed: {0}")]
    Generation(String),

    /// A persisted artifact failed checksum or structural validation.
    #[error("corrupt artifact: {0}")]
    Corrupt(String),

    /// A config document could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Rough severity category used by the CLI to pick an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Shape(_) | Error::Input(_) => ErrorCategory::Input,
            _ => ErrorCategory::Runtime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Input,
    Runtime,
}

pub type Result<T> = std::result::Result<T, Error>;
