use thiserror::Error;

/// Errors raised by the factorization toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("sample {value} at index {index} is not strictly positive")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("no samples supplied")]
    EmptySamples,

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("objective became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("vector is all zeros")]
    ZeroVector,

    #[error("vector must have at least two elements")]
    LengthOne,

    #[error("infeasible norm target: l1 = {l1}, l2 = {l2}, n = {n}")]
    InfeasibleTarget { l1: f64, l2: f64, n: usize },

    #[error("series `{series}` starts at zero and cannot be normalized")]
    ZeroInitialValue { series: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
