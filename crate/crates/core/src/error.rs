use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("ordering error: timestamp {t} at index {index} precedes {prev}")]
    Ordering { index: usize, t: u64, prev: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("stream exhausted: requested {requested} events from index {start}, {available} available")]
    Exhausted {
        start: usize,
        requested: usize,
        available: usize,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable kind, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::Ordering { .. } => "ordering",
            Error::Config(_) => "config",
            Error::Numeric(_) => "numeric",
            Error::Precondition(_) => "precondition",
            Error::Exhausted { .. } => "exhausted",
            Error::Io { .. } => "io",
        }
    }
}
