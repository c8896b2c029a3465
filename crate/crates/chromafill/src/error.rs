use std::path::PathBuf;

/// Errors shared by every module in the crate.
///
/// The CLI maps variants onto process exit codes: `InvalidArgument` and
/// `InvalidState` exit 2, `Io` and `Image` exit 3, `Numeric` exits 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called before its prerequisites were set up,
    /// e.g. a backward pass without a recorded forward pass.
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Non-finite values, diverging solvers, unreachable targets.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
