use thiserror::Error;

use crate::lp::LpError;

/// Errors raised while building or analysing instances and mechanisms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} must be non-empty")]
    EmptyGrid { what: &'static str },

    #[error("{what} must be strictly ascending (entry {index})")]
    NonAscendingGrid { what: &'static str, index: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative probability {value} in {what} at index {index}")]
    NegativeProbability {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{what} sums to {sum}, more than 1e-3 away from 1")]
    SumOutOfTolerance { what: String, sum: f64 },

    #[error("acquiring probability {value} at ({row}, {col}) is outside [0, 1]")]
    ProbabilityOutOfRange { row: usize, col: usize, value: f64 },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} requires exactly two items")]
    RequiresTwoItems(&'static str),

    #[error("LP needs {required} variables, above the size budget of {budget}")]
    SizeBudgetExceeded { required: usize, budget: usize },

    #[error("linear program could not be solved: {0}")]
    Lp(#[from] LpError),

    #[error("LP ended with status {0}")]
    LpStatus(&'static str),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("writing output: {0}")]
    Output(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
