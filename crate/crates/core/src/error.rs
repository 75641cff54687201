use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A kernel was evaluated where it is singular (coincident points).
    #[error("kernel domain error: {0}")]
    Domain(String),

    /// Invalid configuration or violated precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed (for example an SVD did not converge).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Dimensions of an operand do not match the operator.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
