//! Error and result types shared by every module in the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building indexes, training, or
/// evaluating. File-level errors carry the offending path and, where it
/// makes sense, a 1-based line number so callers can point at the input.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("malformed {what}: {message}")]
    BadFormat { what: String, message: String },

    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),

    #[error("duplicate judgment for query {query:?} and doc {doc:?}")]
    DuplicateJudgment { query: String, doc: String },

    #[error("unknown term {0:?} has no embedding")]
    UnknownTerm(String),

    #[error("unknown sentence id {0:?}")]
    UnknownId(String),

    #[error("no score recorded for query {query:?} and doc {doc:?}")]
    MissingScore { query: String, doc: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector for {0:?} has zero norm")]
    ZeroVector(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("system {name}: {source}")]
    System {
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a path to a raw i/o error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Parse failure at a known line of a known file.
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Structural failure in a binary or in-memory artifact.
    pub fn bad_format(what: impl Into<String>, message: impl Into<String>) -> Self {
        Error::BadFormat {
            what: what.into(),
            message: message.into(),
        }
    }

    /// Attribute a failure to one named subsystem (one ablation row, one
    /// pipeline stage).
    pub fn system(name: impl Into<String>, source: Error) -> Self {
        Error::System {
            name: name.into(),
            source: Box::new(source),
        }
    }
}
