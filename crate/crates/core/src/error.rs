use thiserror::Error;

/// Errors raised by frame construction, signal synthesis and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid frame geometry: {0}")]
    InvalidFrame(String),

    #[error("D = {d} is not a multiple of M_tx * P = {unit}; the number of data blocks per gap (Lambda) must be an integer")]
    NonIntegerLambda { d: usize, unit: usize },

    #[error("invalid run-length constraint: d = {d} must be smaller than k = {k}")]
    InvalidConstraint { d: usize, k: usize },

    #[error("sequence length {length} cannot be filled with runs of length {min_run}..={max_run}")]
    LengthTooShort {
        length: usize,
        min_run: usize,
        max_run: usize,
    },

    #[error("block index {index} out of range (frame has {blocks} blocks)")]
    BlockOutOfRange { index: usize, blocks: usize },

    #[error("oversampling ratio T/T_s = {0} is not a positive integer")]
    NonIntegerOversampling(f64),

    #[error("invalid pulse parameter: {0}")]
    InvalidPulse(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("parameter `{name}` must be non-negative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("correlation sum is exactly zero; block carries no phase information")]
    DegenerateSum,

    #[error("invalid estimator settings: {0}")]
    InvalidSettings(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
