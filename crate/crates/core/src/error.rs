use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed annotation JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },

    #[error("polygon `{id}` has fewer than 3 distinct points")]
    DegeneratePolygon { id: String },

    #[error("unknown polygon label `{0}` (expected cytoplasm or nucleus)")]
    UnknownLabel(String),

    #[error("shape `{id}` has unsupported shape_type `{shape_type}`")]
    UnsupportedShape { id: String, shape_type: String },

    #[error("duplicate polygon id `{0}`")]
    DuplicateId(String),

    #[error("image size must be positive, got {width}x{height}")]
    ImageSize { width: u32, height: u32 },

    #[error("cannot decode image: {0}")]
    Decode(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dimension mismatch: {0}")]
    Dimensions(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot encode image: {0}")]
    Encode(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
