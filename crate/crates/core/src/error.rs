use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point ({x:.3}, {y:.3}) lies outside the terrain extent")]
    OutOfExtent { x: f64, y: f64 },

    #[error("camera at z = {camera_z:.3} m is below the terrain surface ({ground:.3} m)")]
    BelowTerrain { camera_z: f64, ground: f64 },

    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("corrupt file {file}: {reason}")]
    CorruptFile { file: String, reason: String },

    #[error("{file}: format version {found} is not supported (expected {expected})")]
    VersionMismatch {
        file: String,
        found: u32,
        expected: u32,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(file: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::CorruptFile {
            file: file.into(),
            reason: reason.into(),
        }
    }
}
