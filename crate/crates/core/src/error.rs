use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{table} table is missing required column {column}")]
    MissingColumn { table: String, column: String },

    #[error("duplicate crash key {key} in {table} table")]
    DuplicateKey { table: String, key: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },

    #[error("empty vocabulary: no term reaches min_df = {min_df}")]
    EmptyVocabulary { min_df: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("optimizer did not converge after {iterations} iterations (gradient inf-norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    #[error("unseen categorical level {level:?} for factor {factor}")]
    UnseenLevel { factor: String, level: String },

    #[error("invalid spatial weights: {0}")]
    Weights(String),

    #[error("no run converged: {0}")]
    AllRunsFailed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv { path: path.into(), source }
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format { what: what.into(), detail: detail.into() }
    }
}
