use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::IdsSource;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

/// A record that could not be turned into an [`crate::model::Alert`].
#[derive(Debug, Clone, Error)]
#[error("{dialect} record at line {line}: {kind}")]
pub struct ParseError {
    pub dialect: IdsSource,
    pub line: u64,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Error)]
pub enum ParseErrorKind {
    #[error("malformed json: {0}")]
    Json(String),
    #[error("missing timestamp")]
    MissingTimestamp,
    #[error("unreadable timestamp {0:?}")]
    BadTimestamp(String),
    #[error("missing signature")]
    MissingSignature,
}
