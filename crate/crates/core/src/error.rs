use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {n} out of range [1, {max}]")]
    DimensionOutOfRange { n: usize, max: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("control and target are both {0}")]
    SameControlTarget(usize),

    #[error("matrix is not invertible over GF(2)")]
    NotInvertible,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("exact search refuses n = {n} (limit {limit})")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("episode {episode} outside schedule of {total} episodes")]
    EpisodeOutOfRange { episode: usize, total: usize },

    #[error("step called on a finished episode")]
    EpisodeDone,

    #[error("non-finite loss during update: {0}")]
    NonFiniteLoss(String),

    #[error("circuit failed verification: {0}")]
    Verification(String),

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
