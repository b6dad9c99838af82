use std::path::PathBuf;

use thiserror::Error;

use crate::model::MonthStamp;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid month stamp {year}-{month:02}: month out of range")]
    MonthOutOfRange { year: i32, month: u32 },

    #[error("cannot parse month stamp {0:?} (expected YYYY-MM)")]
    BadStamp(String),

    #[error("invalid wage series for {person_id}: {reason}")]
    InvalidSeries { person_id: String, reason: String },

    #[error("price index has no entry for {0}")]
    MissingIndex(MonthStamp),

    #[error("invalid price index: {0}")]
    InvalidIndex(String),

    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },

    #[error("unknown employer nature code {0:?}")]
    UnknownNature(String),

    #[error("insufficient observations for k")]
    InsufficientForK,

    #[error("no changes computable")]
    NoChanges,

    #[error("downside deviation of an empty change list")]
    EmptyChanges,

    #[error("invalid class count {k}: {reason}")]
    InvalidClassCount { k: usize, reason: String },

    #[error("brute-force breaks limited to {limit} values, got {n}")]
    InstanceTooLarge { n: usize, limit: usize },

    #[error("bracket table: {0}")]
    InvalidBrackets(String),

    #[error("{0}")]
    InvalidConfig(String),

    #[error("trim leaves no values: {0}")]
    EmptyTrim(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn series(person_id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidSeries { person_id: person_id.to_owned(), reason: reason.into() }
    }
}
