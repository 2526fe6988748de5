use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("layer {layer}: {detail}")]
    Layer { layer: String, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    WeightFile(#[from] WeightFileError),

    #[error("image {path}: {detail}")]
    Image { path: PathBuf, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error("non-finite loss at step {step} (epoch {epoch}); parameter norms: {norms}")]
    NonFiniteLoss { step: usize, epoch: usize, norms: String },

    #[error("gradient check: {0}")]
    GradCheck(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failure categories when reading a serialized network.
#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u32),

    #[error("schema mismatch at layer {layer}: {detail}")]
    SchemaMismatch { layer: String, detail: String },

    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}
