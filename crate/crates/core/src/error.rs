use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Codec { path: PathBuf, message: String },

    #[error("unsupported image format in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("image dimensions {width}x{height} overflow")]
    DimensionOverflow { width: u64, height: u64 },

    #[error("invalid image data: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample point ({x}, {y}) outside image {width}x{height}")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("degenerate histogram: region holds fewer than two distinct values")]
    DegenerateHistogram,

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("contour too short: {points} points, need at least {needed}")]
    ContourTooShort { points: usize, needed: usize },

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("pattern does not fit in a {size}px image: {reason}")]
    PatternDoesNotFit { size: usize, reason: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("parameter file: {0}")]
    ParamFile(#[from] crate::nnet::ParamFileError),

    #[error("no line-like component in {0}")]
    NoLineComponent(String),

    #[error("bootstrap aborted at iteration {iteration}: {reason}")]
    BootstrapAborted { iteration: usize, reason: String },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
