use thiserror::Error;

/// Errors raised while building or fitting a distance-penalized GLM.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid {family} response {value} at case {index}")]
    InvalidResponse {
        family: &'static str,
        index: usize,
        value: f64,
    },

    #[error("objective is not finite at case {case} (linear predictor {theta})")]
    NonFiniteObjective { case: usize, theta: f64 },

    #[error("argument `{argument}` = {value} is outside the divergence domain")]
    Domain { argument: &'static str, value: f64 },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("search direction is not a descent direction (slope {slope:e})")]
    NotDescent { slope: f64 },

    #[error("line search stagnated after {halvings} halvings")]
    Stagnation { halvings: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
