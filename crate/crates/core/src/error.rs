use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced by `{op}`")]
    NonFinite { op: &'static str },

    #[error("invalid architecture: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for parameter store of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("diverged at {at}")]
    Divergence { at: String },

    #[error("series too short: need {needed} samples, have {have}")]
    SeriesTooShort { needed: usize, have: usize },

    #[error("time {t} outside forcing support [0, {end}]")]
    Support { t: f64, end: f64 },

    #[error("accumulator step mismatch: expected step {expected}, got {got}")]
    StepMismatch { expected: u64, got: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
