use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ingestion
    #[error("unknown column `{0}` in header")]
    UnknownColumn(String),
    #[error("column `{0}` declared in the schema is absent from the header")]
    MissingColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("line {line}: non-numeric token `{token}` in numeric column `{column}`")]
    NonNumeric {
        line: usize,
        column: String,
        token: String,
    },
    #[error("line {line}: unknown category `{token}` in column `{column}`")]
    UnknownCategory {
        line: usize,
        column: String,
        token: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: String, reason: String },

    // numerics
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("missing cell at row {row}, column `{column}`")]
    MissingCell { row: usize, column: String },
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("test undefined: {0}")]
    TestUndefined(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    // models
    #[error("training failed: {0}")]
    Training(String),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("operation requires a tree model, got {0}")]
    NotATree(String),

    // explainers
    #[error("no valid counterfactual within budget (best attempt reached p={best_probability:.4} for the target class)")]
    NoCounterfactual {
        best_attempt: Vec<f64>,
        best_probability: f64,
    },
    #[error("no mutable features")]
    NoMutableFeatures,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
