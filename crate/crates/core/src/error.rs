use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (negative evidence, K < 2, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch at node `{node}`: {detail}")]
    Shape { node: String, detail: String },

    /// API misuse, such as running backward on an empty tape.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("insufficient pool: need {needed} {what} examples, have {available}")]
    InsufficientPool {
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(node: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            node: node.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
