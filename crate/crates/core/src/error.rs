use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("sample {value} at index {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },

    /// A requested time (or a row's exposure window) falls outside the
    /// span covered by the source sequence.
    #[error("{}time {time}s outside sequence range [{start}s, {end}s]", .row.map(|r| format!("row {r}: ")).unwrap_or_default())]
    TimeOutOfRange {
        row: Option<usize>,
        time: f64,
        start: f64,
        end: f64,
    },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed input {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
