use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("malformed input at {location}: {message}")]
    Malformed { location: String, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("keyword '{0}' has zero variance; its correlations are undefined")]
    ZeroVariance(String),

    #[error("return series are not aligned on the same dates")]
    MisalignedDates,

    #[error("correlation matrix factorization failed: {0}")]
    Factorization(String),

    #[error("broad-match weight refers to sub-keyword {index}, only {available} present")]
    MissingSubKeyword { index: usize, available: usize },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("no usable keywords: {0}")]
    EmptyKeywordSet(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end: 2 for validation
    /// failures, 3 for data that is well-formed but degenerate.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) | Error::ZeroVariance(_) | Error::EmptyKeywordSet(_) => 3,
            _ => 2,
        }
    }
}
