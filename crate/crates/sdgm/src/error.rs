use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (CSV rows, spec files, config files).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input that parses but violates a domain invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Inconsistent or out-of-range analysis configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure (singular matrices, too many dropped frequencies).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code convention: 1 for bad input/config, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
