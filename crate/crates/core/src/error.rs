use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("column {column} is degenerate after centering (norm {norm:e})")]
    DegenerateColumn { column: usize, norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("conjugate gradient denominator vanished ({0:e})")]
    ZeroDenominator(f64),

    #[error("line search failed: step shrank below {min_step:e} at iteration {iteration}")]
    LineSearchFailure { iteration: usize, min_step: f64 },

    #[error("rank deficient operator: Gram determinant {0:e}")]
    RankDeficient(f64),

    #[error("rows {0} and {1} are coincident")]
    CoincidentRows(usize, usize),

    #[error("patch dimension {0} is too small; at least 3 entries are required")]
    PatchTooSmall(usize),

    #[error("only {found} of {requested} patch pairs passed the standard deviation filter")]
    InsufficientSamples { requested: usize, found: usize },

    #[error("objective is not finite: {0}")]
    NonFiniteObjective(f64),

    #[error("registration gradient is not finite")]
    NonFiniteGradient,

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("malformed file at byte {offset}: {reason}")]
    MalformedFile { offset: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
