use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("{malformed} of {total} rows malformed, above the {limit_pct:.2}% limit")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        limit_pct: f64,
    },

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty window")]
    EmptyWindow,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("only one class present in {0}")]
    SingleClass(&'static str),

    #[error("need at least {need} distinct groups, have {have}")]
    TooFewGroups { need: usize, have: usize },

    #[error("column name collision: `{0}`")]
    ColumnCollision(String),

    #[error("no rows survived assembly")]
    EmptyMatrix,

    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),

    #[error("feature column `{0}` not present in matrix")]
    MissingFeature(String),

    #[error("no external prediction for fold {fold}, session {session_id}, timestamp {timestamp_ms}")]
    UnmatchedKey {
        fold: usize,
        session_id: String,
        timestamp_ms: i64,
    },

    #[error("sharpe ratio undefined: daily returns have zero variance")]
    ZeroVariance,

    #[error("missing artifact for stage `{stage}`: {path}")]
    MissingArtifact { stage: String, path: PathBuf },

    #[error("digest mismatch for stage `{stage}`: {detail}")]
    DigestMismatch { stage: String, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
