use std::io;
use std::path::PathBuf;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes, channel counts, or hyperparameters that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was handed an argument of the wrong kind (e.g. a high-pass
    /// kernel field where a low-pass one is required).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// NaN or infinity where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Malformed binary tensor file.
    #[error("parse error at byte offset {offset}: {msg}")]
    Parse { offset: u64, msg: String },

    /// Malformed key=value text (config files, manifests).
    #[error("{source_name}:{line}: {msg}")]
    Text {
        source_name: String,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: {msg}", path.display())]
    Image { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}
pub(crate) use config_err;
