use thiserror::Error;

/// Errors raised by the forecasting engine.
///
/// The variants are grouped by the exit code the command line maps them to:
/// schema and data problems are input errors, numerical failures come from
/// training or linear algebra, and invalid arguments are usage errors.
#[derive(Debug, Error)]
pub enum EpfError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl EpfError {
    pub(crate) fn dim(expected: usize, actual: usize, context: &'static str) -> Self {
        EpfError::DimensionMismatch {
            expected,
            actual,
            context,
        }
    }
}

pub type Result<T> = std::result::Result<T, EpfError>;
