use thiserror::Error;

use crate::expr::ExprParseError;

pub type Result<T> = std::result::Result<T, TabularError>;

/// Errors raised by table operations and learners.
///
/// The display strings double as tool error details, so they are kept short
/// and free of trailing punctuation unless the punctuation is part of a
/// well-known phrasing (e.g. `Input y contains NaN.`).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TabularError {
    #[error("[Errno 2] No such file or directory: '{0}'")]
    FileNotFound(String),
    #[error("Error tokenizing data at row {row}, column {col}: {detail}")]
    Parse { row: usize, col: usize, detail: String },
    #[error("None of {0:?} are in the columns")]
    UnknownColumn(Vec<String>),
    #[error("Column '{column}' has dtype {dtype}; {strategy} requires a numeric column")]
    NonNumericForMean {
        column: String,
        dtype: String,
        strategy: String,
    },
    #[error("Incompatible schemas: column '{column}' is {left} in the first table and {right} in the second")]
    IncompatibleSchemas {
        column: String,
        left: String,
        right: String,
    },
    #[error("Tracking column '__is_train__' is missing or contains missing values")]
    TrackingColumnMissing,
    #[error("{0}")]
    ExprParse(ExprParseError),
    #[error("{0}")]
    ExprType(String),
    #[error("Condition must evaluate to a boolean, got {0}")]
    NonBooleanCondition(String),
    #[error("Input y contains NaN.")]
    TargetMissingValues,
    #[error("could not convert string to float: non-numeric feature columns {0:?}")]
    NonNumericFeatures(Vec<String>),
    #[error("Input X contains NaN. Columns with missing values: {0:?}")]
    NaNInFeatures(Vec<String>),
    #[error("Cannot have number of splits n_splits={cv} greater than the number of samples: n_samples={n_rows}")]
    CvTooLarge { cv: usize, n_rows: usize },
    #[error("The feature names should match those that were passed during fit. Missing: {missing:?}; unexpected: {extra:?}")]
    FeatureMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("Parameter grid for '{0}' is empty")]
    EmptyGrid(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("Duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("Length mismatch: expected {expected} rows, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

impl TabularError {
    /// The exception class name a Python data stack would raise for the same
    /// failure; tool messages render errors as `Class('detail')`.
    pub fn python_class(&self) -> &'static str {
        match self {
            TabularError::FileNotFound(_) => "FileNotFoundError",
            TabularError::Parse { .. } => "ParserError",
            TabularError::UnknownColumn(_) => "KeyError",
            TabularError::NonNumericForMean { .. }
            | TabularError::NonNumericFeatures(_)
            | TabularError::ExprType(_)
            | TabularError::NonBooleanCondition(_) => "TypeError",
            TabularError::ExprParse(_) => "SyntaxError",
            TabularError::Io(_) => "OSError",
            _ => "ValueError",
        }
    }
}

impl From<ExprParseError> for TabularError {
    fn from(e: ExprParseError) -> Self {
        TabularError::ExprParse(e)
    }
}

impl From<std::io::Error> for TabularError {
    fn from(e: std::io::Error) -> Self {
        TabularError::Io(e.to_string())
    }
}
