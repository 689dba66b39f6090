use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("trace row {row}: {reason}")]
    Trace { row: usize, reason: String },

    #[error("empty worker population")]
    EmptyPopulation,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("latency estimate undefined: {0}")]
    UndefinedEstimate(&'static str),

    #[error("batch contains no tasks")]
    EmptyBatch,

    #[error("task {0} is not complete")]
    TaskIncomplete(u64),

    #[error("no labeled points to train on")]
    EmptyTrainingSet,

    #[error("holdout set is empty")]
    EmptyHoldout,

    #[error("objective denominator is zero")]
    ZeroObjective,

    #[error("config {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("dataset row {row}: {reason}")]
    Dataset { row: usize, reason: String },

    #[error("event log line {line}: {reason}")]
    EventLog { line: usize, reason: String },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
