use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Covariance factorization failed; the observation covariance is not
    /// positive definite at the requested ridge.
    #[error("singular moments: {0}; retry with a larger ridge")]
    SingularMoments(String),

    /// The iterative solver produced a non-finite objective.
    #[error("solver diverged at iteration {iter}: objective is not finite")]
    Divergence { iter: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("version mismatch: {0}")]
    VersionMismatch(String),

    #[error("missing config key: {0}")]
    MissingConfigKey(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
