use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid factor: {0}")]
    InvalidFactor(String),

    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),

    #[error("model has {n} variables, enumeration is limited to {max}")]
    TooManyVariables { n: usize, max: usize },

    #[error("partition function is zero (contradictory hard factors)")]
    ZeroPartition,

    #[error("induced width {width} exceeds the exact-inference limit of {max}")]
    WidthExceeded { width: usize, max: usize },

    #[error("elimination order is not a permutation of the model's variables: {0}")]
    InvalidOrder(String),

    #[error("i-bound must be at least 1")]
    InvalidIBound,

    #[error("UAI parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported cardinality {cardinality} for variable {variable}; only binary variables are supported")]
    UnsupportedCardinality { variable: usize, cardinality: usize },
}
