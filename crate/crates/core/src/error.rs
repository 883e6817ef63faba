use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: unsupported wave format ({detail})")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("{path}: data chunk is empty")]
    EmptyData { path: PathBuf },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("signal is silent")]
    Silent,

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("energy decay never reached {floor_db} dB before the response ended")]
    InsufficientDecay { floor_db: f64 },

    #[error("energy decay slope is not negative ({slope_db_per_s} dB/s)")]
    NonNegativeSlope { slope_db_per_s: f64 },

    #[error("tolerance window of {window} samples does not fit a {len}-sample response")]
    WindowTooLong { window: usize, len: usize },

    #[error("inventory is empty")]
    EmptyInventory,

    #[error("csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input data: {0}")]
    InvalidData(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    /// True when the failure came from the filesystem rather than from the
    /// content or arguments supplied.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Wav { source, .. } => matches!(source, hound::Error::IoError(_)),
            Error::Csv { source, .. } => source.is_io_error(),
            _ => false,
        }
    }
}
