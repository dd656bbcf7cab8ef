use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no candidate bounding box passed the maximality criterion")]
    EmptyPool,

    #[error("value out of encodable range: {0}")]
    Range(String),

    #[error("corrupt part record: {0}")]
    CorruptRecord(String),

    #[error("incompatible descriptors: dictionary `{expected}` vs `{found}`")]
    IncompatibleDescriptor { expected: String, found: String },

    #[error("sum-max-weighted matching requires appearance scores on the query descriptor")]
    MissingScores,

    #[error("original map `{0}` is not available")]
    MissingMap(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed descriptor file: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
