use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset format error at {path}: {reason}")]
    DatasetFormat { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid sticker spec: {0}")]
    InvalidSticker(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite activations in batch {batch}")]
    NonFinite { batch: usize },

    #[error("memory bank error: {0}")]
    Bank(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("phase contract violated: {0}")]
    PhaseContract(String),

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
