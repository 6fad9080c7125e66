use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("channel mismatch: expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("insufficient samples: need at least 2, have {count}")]
    InsufficientSamples { count: u64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("transport certificate failed: {0}")]
    Certificate(String),

    #[error("corrupt operator: {0}")]
    CorruptOperator(String),

    #[error("unsupported dtype {0:?}: only little-endian f32 ('<f4') and f64 ('<f8') are supported")]
    UnsupportedDtype(String),

    #[error("truncated input: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported container version {found} (this build reads version {expected}); re-save the file with a matching release or upgrade")]
    Version { found: u32, expected: u32 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line surface: 3 for data and format
    /// problems, 4 for numerical and certificate failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_)
            | Error::Certificate(_)
            | Error::CorruptOperator(_)
            | Error::InsufficientSamples { .. } => 4,
            _ => 3,
        }
    }
}
