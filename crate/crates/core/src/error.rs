use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDate),

    #[error("timestamps not strictly increasing at index {0}")]
    Unordered(usize),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("non-positive price {value} at index {index}")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),

    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row}: {source}")]
    Row { row: usize, source: Box<Error> },

    #[error("training diverged at epoch {epoch}; last finite epoch {last_finite_epoch}")]
    Diverged {
        epoch: usize,
        last_finite_epoch: usize,
    },

    #[error("ensemble member with seed {seed} failed: {source}")]
    Member { seed: u64, source: Box<Error> },

    #[error("insufficient members: need at least {needed}, got {got}")]
    InsufficientMembers { needed: usize, got: usize },

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("recursion inconsistency: asymmetry {0:e} exceeds tolerance")]
    RecursionInconsistency(f64),

    #[error("x-function does not provide a {0}")]
    MissingDerivative(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad input files or series contents.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::DuplicateTimestamp(_)
            | Error::Unordered(_)
            | Error::NonFinite(_)
            | Error::NonPositivePrice { .. }
            | Error::DegenerateRange(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => true,
            Error::Row { source, .. } | Error::Member { source, .. } => source.is_data_error(),
            _ => false,
        }
    }

    /// Errors raised by the numerical machinery itself.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Diverged { .. }
            | Error::ZeroVariance(_)
            | Error::RecursionInconsistency(_) => true,
            Error::Row { source, .. } | Error::Member { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Error {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }
}
