use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid batch size {batch} for {n} instances")]
    InvalidBatch { batch: usize, n: usize },

    #[error("batch index {index} out of range for {n} instances")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate batch index {0}")]
    DuplicateIndex(usize),

    #[error("non-finite value in {what}{}", .index.map(|i| format!(" (instance {i})")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        index: Option<usize>,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("budget {budget} with batch size {batch} yields zero updates")]
    ZeroUpdates { budget: u64, batch: usize },

    #[error("delta {delta} is below the required minimum {required}")]
    DeltaBelowBound { delta: f64, required: f64 },

    #[error("problem constants required but unknown: {0}")]
    MissingConstants(&'static str),

    #[error("schedule does not fit this driver: {0}")]
    ScheduleShape(String),

    #[error("malformed problem dump at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
