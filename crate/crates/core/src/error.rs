use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("region (top {top}, left {left}, size {size}) exceeds grid {height}x{width}")]
    OutOfBounds {
        top: usize,
        left: usize,
        size: usize,
        height: usize,
        width: usize,
    },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("zero weight at flat index {index}; tile coverage is incomplete")]
    ZeroWeight { index: usize },

    #[error("invalid tiling: {0}")]
    InvalidPlan(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("timestep {t} outside [{min}, {max}]")]
    TimestepOutOfRange { t: usize, min: usize, max: usize },

    #[error("estimator failed on tile {tile}: {source}")]
    Estimator {
        tile: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("light position coincides with the shaded point")]
    DegenerateLight,

    #[error("malformed golden data: {0}")]
    Golden(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
