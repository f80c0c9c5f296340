use thiserror::Error;

use crate::scalar::Field;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric/Hermitian: max deviation {deviation:.3e} exceeds {tolerance:.0e}")]
    NotSymmetric { deviation: f64, tolerance: f64 },

    #[error("field mismatch: expected {expected}, got {found}")]
    FieldMismatch { expected: Field, found: Field },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category, used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NotSymmetric { .. } => "asymmetric",
            Error::FieldMismatch { .. } => "field",
            Error::InvalidArgument(_) => "argument",
            Error::Unsupported(_) => "unsupported",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
