use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid tree in sentence {sentence}: {msg}")]
    InvalidTree { sentence: String, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("lexicon is empty after dropping {dropped} out-of-vocabulary lines")]
    EmptyLexicon { dropped: usize },

    #[error("empty sentence")]
    EmptySentence,

    #[error("position {pos} out of range for length {len}")]
    OutOfRange { pos: usize, len: usize },

    #[error("sentence of length {len} exceeds model max_len {max_len}")]
    TooLong { len: usize, max_len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid target: {0}")]
    Target(String),

    #[error("training set has a single class")]
    SingleClass,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("linear algebra: {0}")]
    LinAlg(String),

    #[error("coordinate descent did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("table is not normalized (total mass {0})")]
    Unnormalized(f64),

    #[error("{condition}: {source}")]
    Condition {
        condition: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn tagged(self, condition: impl Into<String>) -> Self {
        Error::Condition {
            condition: condition.into(),
            source: Box::new(self),
        }
    }
}
