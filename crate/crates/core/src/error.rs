use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data violates a structural invariant (non-finite values, too few rows, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A vector or matrix has the wrong number of features.
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A cell of a CSV file failed to parse as a finite number.
    #[error("parse error at row {row}, column {col} ({name}): {value:?} is not a finite number")]
    ParseCell {
        /// 1-based line number in the file (header included).
        row: usize,
        /// 1-based column number.
        col: usize,
        /// Column name, when known.
        name: String,
        value: String,
    },

    /// Importance accumulation produced no usable inlier or outlier mass.
    #[error("degenerate importance: {0}")]
    DegenerateImportance(String),

    /// A feature-selection run failed after some runs already completed.
    #[error("feature selection aborted at run {failed_run} ({completed_runs} runs completed): {cause}")]
    SelectionAborted {
        failed_run: usize,
        completed_runs: usize,
        cause: Box<Error>,
    },

    /// A model file declares a format version this build does not support.
    #[error("unsupported model version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    /// A model or dataset file is structurally broken.
    #[error("corrupt file: {0}")]
    CorruptFile(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
