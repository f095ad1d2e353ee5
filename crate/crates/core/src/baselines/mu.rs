use ndarray::{Array2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BaselineResult;
use crate::error::{Error, Result};
use crate::matrix::{frobenius_sq, DataMatrix, FactorPair};
use crate::solver::{auto_delta, random_uniform_factors};

/// Added to every denominator of the update ratios.
pub const MU_EPSILON: f64 = 1e-12;

pub(crate) fn multiplicative_step(base: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>) {
    Zip::from(base)
        .and(numer)
        .and(denom)
        .for_each(|b, &n, &d| *b *= n / (d + MU_EPSILON));
}

/// `H ← H ⊙ (WᵀV)/(WᵀWH + ε)`
pub(crate) fn mu_update_h(v: &Array2<f64>, f: &mut FactorPair) {
    let numer = f.w.t().dot(v);
    let denom = f.w.t().dot(&f.w).dot(&f.h);
    multiplicative_step(&mut f.h, &numer, &denom);
}

/// `W ← W ⊙ (VHᵀ)/(WHHᵀ + ε)`
pub(crate) fn mu_update_w(v: &Array2<f64>, f: &mut FactorPair) {
    let numer = v.dot(&f.h.t());
    let denom = f.w.dot(&f.h.dot(&f.h.t()));
    multiplicative_step(&mut f.w, &numer, &denom);
}

pub(crate) fn reconstruction_error(v: &Array2<f64>, f: &FactorPair) -> f64 {
    frobenius_sq(&v.view(), &f.product().view()).expect("shapes checked by caller")
}

/// Multiplicative updates from a seeded uniform start.
pub fn mu_nmf(v: &DataMatrix, rank: usize, iterations: usize, seed: u64) -> Result<BaselineResult> {
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = random_uniform_factors(v.shape(), rank, v.mean(), auto_delta(v) / 2.0, &mut rng);
    mu_nmf_from(v, init, iterations)
}

/// Multiplicative updates from the given factors.
pub fn mu_nmf_from(v: &DataMatrix, init: FactorPair, iterations: usize) -> Result<BaselineResult> {
    init.check_against(v.shape())?;
    let vals = v.values();
    let mut f = init;
    let mut trace = Vec::with_capacity(iterations + 1);
    trace.push(reconstruction_error(vals, &f));
    for it in 1..=iterations {
        mu_update_h(vals, &mut f);
        mu_update_w(vals, &mut f);
        let err = reconstruction_error(vals, &f);
        if !err.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        trace.push(err);
    }
    Ok(BaselineResult {
        factors: f,
        error_trace: trace,
    })
}
