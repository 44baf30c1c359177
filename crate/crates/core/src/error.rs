use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsatisfiable prompt spec: {0}")]
    UnsatisfiableSpec(String),
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("grid has masked positions")]
    MaskedInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask is empty")]
    EmptyMask,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("trajectory is incomplete: {0}")]
    IncompleteTrajectory(String),
    #[error("series too short: need at least {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("K = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("group too small: {0} (need >= 2)")]
    GroupTooSmall(usize),
    #[error("stale snapshot: cached for {cached:?}, expected {expected:?}")]
    StaleSnapshot { cached: (u64, u64), expected: (u64, u64) },
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
