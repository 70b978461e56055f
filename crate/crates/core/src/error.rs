use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("span ({start},{end}) out of range for text of length {len}")]
    Range { start: usize, end: usize, len: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unknown {kind} label {value:?}")]
    UnknownLabel { kind: &'static str, value: String },

    #[error("label {value:?} is not a class of context dimension {dimension}")]
    Taxonomy { dimension: &'static str, value: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("reference error at line {line}: {message}")]
    Reference { line: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("shape mismatch: expected dimension {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("missing {what} for: {}", ids.join(", "))]
    Completeness { what: &'static str, ids: Vec<String> },

    #[error("overlapping gold mentions: {0}")]
    Overlap(String),

    #[error("chunking error: {0}")]
    Chunk(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the caller's arguments rather than data.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Usage(_) | Error::Config(_) => true,
            Error::File { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
