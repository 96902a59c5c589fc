use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or mismatched dimensions supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was invoked out of order or with values it does not accept.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    /// The policy-induced state chain is not irreducible and aperiodic.
    #[error("state chain is not mixing: {0}")]
    NotMixing(String),

    #[error("oracle check failed: {0}")]
    Oracle(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// An input file that cannot be read is a data error, not a runtime
    /// failure.
    pub(crate) fn unreadable(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Data {
            path: path.to_path_buf(),
            message: format!("cannot read: {source}"),
        }
    }

    /// Errors caused by user input (config, data files) rather than by a
    /// failure while running.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::Data { .. }
        )
    }
}
