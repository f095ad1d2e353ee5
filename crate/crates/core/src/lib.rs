//! Non-negative matrix factorization under a minimum-description-length
//! objective.
//!
//! The solver in [`solver`] looks for `V ≈ W·H` by minimizing the number of
//! bits needed to send `W`, `H` and the correction `E = V − W·H` at a fixed
//! precision δ, so model complexity and reconstruction accuracy are traded
//! off without a tuned regularizer. [`baselines`] holds the Lee–Seung and
//! Hoyer factorizers used for comparison, and [`synthgen`] builds the
//! semi-synthetic signal-versus-noise experiments.

pub mod baselines;
pub mod distfit;
pub mod error;
pub mod matrix;
pub mod objective;
pub mod solver;
pub mod special;
pub mod synthgen;

pub use error::{Error, Result};
pub use matrix::{
    frobenius_sq, validate_nonneg, CodeModel, DataMatrix, DescriptionLength, FactorPair,
    ResidualMatrix, RunTrace, TraceRecord,
};
pub use solver::{mdl_nmf, InitStrategy, Solution, SolverConfig};
