use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {name} must be at least 1")]
    ZeroDimension { name: &'static str },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid kernel parameters: {0}")]
    InvalidParams(String),

    #[error("invalid launch: {0}")]
    InvalidLaunch(String),

    #[error("shared memory overflow: block needs {needed} bytes, SM has {available}")]
    SharedMemoryOverflow { needed: usize, available: usize },

    #[error("out-of-bounds {array} access at flat index {index} (len {len})")]
    OutOfBounds {
        array: &'static str,
        index: usize,
        len: usize,
    },

    #[error("gpu spec `{gpu}`: {reason}")]
    GpuSpec { gpu: String, reason: String },

    #[error("unknown gpu `{0}`")]
    UnknownGpu(String),

    #[error("config parse error in {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
