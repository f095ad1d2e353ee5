//! Reference factorizers: Lee–Seung multiplicative updates on the Frobenius
//! error and Hoyer's sparseness-constrained NMF.

mod mu;
mod sparse;

pub use mu::{mu_nmf, mu_nmf_from, MU_EPSILON};
pub use sparse::{
    hoyer_sparseness, l1_for_sparseness, project_sparseness, snmf, snmf_from, SparsenessTarget,
};

use crate::matrix::FactorPair;

/// Factors from a baseline run and `‖V − WH‖²` after each iteration.
/// `error_trace[0]` is the error at the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub factors: FactorPair,
    pub error_trace: Vec<f64>,
}

impl BaselineResult {
    pub fn final_error(&self) -> f64 {
        *self.error_trace.last().expect("trace holds the initial error")
    }
}
