use thiserror::Error;

use crate::dynamics::TrajectoryRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{argument}`: expected {expected}, found {found}")]
    DimensionMismatch {
        argument: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty measure")]
    EmptyMeasure,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("blow-up at step {step}: max particle norm {max_norm:e}")]
    BlowUp {
        step: usize,
        max_norm: f64,
        partial: Option<Box<TrajectoryRecord>>,
    },

    #[error("combined support size {size} exceeds the exact-solver cap {cap}; subsample the measures")]
    SupportCapExceeded { size: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("exponential moment overflows at atom norm {norm}")]
    ExpOverflow { norm: f64 },

    #[error("insufficient samples for {what}: got {got}, need at least {need}")]
    InsufficientSamples {
        what: &'static str,
        got: usize,
        need: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn check_dim(argument: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                argument,
                expected,
                found,
            })
        }
    }
}
