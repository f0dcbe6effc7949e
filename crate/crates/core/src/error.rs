//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("column '{column}' required by the schema is missing from the file header")]
    MissingColumn { column: String },

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    CellParse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column '{column}': unknown categorical level '{level}'")]
    UnknownLevel {
        row: usize,
        column: String,
        level: String,
    },

    #[error("row {row}, column '{column}': label must be 0 or 1, got '{value}'")]
    BadLabel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not invertible even after regularization")]
    SingularMatrix,

    #[error("non-finite loss at epoch {epoch} during network training")]
    NonFiniteLoss { epoch: usize },

    #[error("operation requires a decision tree predictor, got {got}")]
    NotATree { got: String },

    #[error("decision paths come from different trees")]
    DifferentTrees,

    #[error("tree has no leaf of class {class}")]
    NoTargetLeaf { class: u8 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("snapshot version {got} is not supported (expected {expected})")]
    SnapshotVersion { expected: u32, got: u32 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
