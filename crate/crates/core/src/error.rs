use thiserror::Error;

/// Errors surfaced by the matcher and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates a precondition.
    #[error("input error: {0}")]
    Input(String),

    /// Point configuration makes the reduced design rank deficient.
    #[error("degenerate input: design column {column} is linearly dependent on earlier columns")]
    Degenerate { column: usize },

    /// A numeric precondition failed at run time (e.g. a matrix that had to be
    /// positive definite was not).
    #[error("numeric domain error: {message} (min eigenvalue estimate {min_eigenvalue:.3e})")]
    NumericDomain { message: String, min_eigenvalue: f64 },

    /// A solver invariant was violated. Indicates a bug, not bad data.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Parse { .. } | Error::Degenerate { .. } | Error::Io(_) => 2,
            Error::NumericDomain { .. } => 3,
            Error::Internal(_) => 4,
        }
    }
}
