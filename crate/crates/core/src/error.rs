use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transition kernel has no positive entry")]
    EmptyKernel,

    #[error("fixed-point iteration stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("brute-force oracle supports at most 3 atoms, got {0}")]
    OracleSupportTooLarge(usize),

    #[error("sample batch has an empty tail (level above threshold)")]
    EmptyTail,

    #[error("non-finite Q entry at state {state}, action {action} after iteration {iteration}")]
    NonFinite {
        iteration: usize,
        state: usize,
        action: usize,
    },
}
