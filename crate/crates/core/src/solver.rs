//! Gradient descent on the description-length objective.
//!
//! Each iteration floors the factors at `δ/2`, takes a gradient step in `W`
//! and then in `H` (the `H` step sees the updated `W` and the fresh residual),
//! refits the code model by maximum likelihood and evaluates the objective.
//! A step that does not lower the objective is reverted, together with the
//! code model, and both learning rates are scaled down.

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::distfit::{fit_gamma, fit_gaussian};
use crate::error::{Error, Result};
use crate::matrix::{
    CodeModel, DataMatrix, DescriptionLength, FactorPair, ResidualMatrix, RunTrace, TraceRecord,
};
use crate::objective::{description_length_parts, grad_h, grad_w, residual};

/// Precision δ, either given or derived from the data range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    Auto,
    Fixed(f64),
}

impl Delta {
    pub fn resolve(&self, v: &DataMatrix) -> f64 {
        match *self {
            Delta::Auto => auto_delta(v),
            Delta::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub delta: Delta,
    /// Initial step for `W`; `None` picks a scale-aware default at startup.
    pub learning_rate_w: Option<f64>,
    /// Initial step for `H`; `None` picks a scale-aware default at startup.
    pub learning_rate_h: Option<f64>,
    pub max_iterations: usize,
    pub lr_reduction_factor: f64,
    pub min_learning_rate: f64,
    pub stop_patience: usize,
    pub stop_rel_tol: f64,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        SolverConfig {
            rank,
            delta: Delta::Auto,
            learning_rate_w: None,
            learning_rate_h: None,
            max_iterations: 10_000,
            lr_reduction_factor: 0.5,
            min_learning_rate: 1e-14,
            stop_patience: 50,
            stop_rel_tol: 1e-7,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if let Delta::Fixed(d) = self.delta {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("delta must be positive, got {d}"));
            }
        }
        for lr in [self.learning_rate_w, self.learning_rate_h].into_iter().flatten() {
            if !(lr.is_finite() && lr > 0.0) {
                return bad(format!("learning rate must be positive, got {lr}"));
            }
        }
        if !(self.lr_reduction_factor > 0.0 && self.lr_reduction_factor < 1.0) {
            return bad(format!(
                "learning-rate reduction factor must lie in (0, 1), got {}",
                self.lr_reduction_factor
            ));
        }
        if !(self.min_learning_rate > 0.0) {
            return bad("minimum learning rate must be positive".into());
        }
        if !(self.stop_rel_tol > 0.0) {
            return bad("relative stopping tolerance must be positive".into());
        }
        if self.stop_patience == 0 {
            return bad("stop patience must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Entries drawn uniformly from `[δ/2, c)`, with `c` chosen so that the
    /// expected mean of `W·H` equals the mean of `V`.
    RandomUniform,
    /// Start from given factors perturbed by `N(0, noise_sigma²)` noise.
    WarmStart { source: FactorPair, noise_sigma: f64 },
}

/// Precision from the data range: `(max − min)/1000`, or a small multiple of
/// the value for constant data.
pub fn auto_delta(v: &DataMatrix) -> f64 {
    let (lo, hi) = (v.min(), v.max());
    if hi > lo {
        (hi - lo) / 1000.0
    } else {
        f64::max(1e-6, hi.abs() * 1e-6)
    }
}

/// Raise every entry below `δ/2` to `δ/2`.
pub fn clamp_factors(factors: &FactorPair, delta: f64) -> FactorPair {
    let mut out = factors.clone();
    clamp_in_place(&mut out.w, delta);
    clamp_in_place(&mut out.h, delta);
    out
}

fn clamp_in_place(m: &mut Array2<f64>, delta: f64) {
    let floor = delta / 2.0;
    m.mapv_inplace(|x| if x < floor { floor } else { x });
}

pub(crate) fn random_uniform_factors(
    shape: (usize, usize),
    rank: usize,
    target_mean: f64,
    floor: f64,
    rng: &mut ChaCha8Rng,
) -> FactorPair {
    let (m, n) = shape;
    // E[WH] = r·((lo + hi)/2)² for i.i.d. uniform entries on [lo, hi).
    let mut hi = 2.0 * (target_mean / rank as f64).sqrt() - floor;
    if !(hi > floor) {
        hi = 2.0 * floor.max(f64::MIN_POSITIVE);
    }
    let w = Array2::from_shape_simple_fn((m, rank), || rng.random_range(floor..hi));
    let h = Array2::from_shape_simple_fn((rank, n), || rng.random_range(floor..hi));
    FactorPair { w, h }
}

/// Starting factors for a solve. Deterministic for a given `config.seed`.
pub fn init_factors(
    v: &DataMatrix,
    config: &SolverConfig,
    strategy: &InitStrategy,
) -> Result<FactorPair> {
    let delta = config.delta.resolve(v);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match strategy {
        InitStrategy::RandomUniform => Ok(random_uniform_factors(
            v.shape(),
            config.rank,
            v.mean(),
            delta / 2.0,
            &mut rng,
        )),
        InitStrategy::WarmStart {
            source,
            noise_sigma,
        } => {
            source.check_against(v.shape())?;
            if source.rank() != config.rank {
                return Err(Error::ShapeMismatch {
                    expected: (v.rows(), config.rank),
                    found: source.w.dim(),
                });
            }
            let mut out = source.clone();
            if *noise_sigma > 0.0 {
                let normal = Normal::new(0.0, *noise_sigma).map_err(|e| {
                    Error::InvalidConfig(format!("warm-start noise: {e}"))
                })?;
                out.w.mapv_inplace(|x| x + normal.sample(&mut rng));
                out.h.mapv_inplace(|x| x + normal.sample(&mut rng));
            } else if *noise_sigma < 0.0 || noise_sigma.is_nan() {
                return Err(Error::InvalidConfig(format!(
                    "warm-start noise must be non-negative, got {noise_sigma}"
                )));
            }
            Ok(clamp_factors(&out, delta))
        }
    }
}

fn flat(m: &Array2<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

/// Refit the code model to the current factors and residual.
pub fn fit_code_model(factors: &FactorPair, e: &ResidualMatrix, delta: f64) -> Result<CodeModel> {
    Ok(CodeModel {
        gamma_w: fit_gamma(&flat(&factors.w))?,
        gamma_h: fit_gamma(&flat(&factors.h))?,
        gauss_e: fit_gaussian(&flat(e.values()))?,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    LearningRateFloor,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Lowest-objective accepted state.
    pub factors: FactorPair,
    /// Code model fitted to `factors`.
    pub model: CodeModel,
    pub description_length: DescriptionLength,
    pub trace: RunTrace,
    pub stop_reason: StopReason,
}

struct State {
    factors: FactorPair,
    e: ResidualMatrix,
    model: CodeModel,
    dl: DescriptionLength,
}

impl State {
    fn evaluate(v: &DataMatrix, factors: FactorPair, delta: f64) -> Result<State> {
        let e = residual(v, &factors)?;
        let model = fit_code_model(&factors, &e, delta)?;
        let dl = description_length_parts(&factors, &e, &model)?;
        Ok(State {
            factors,
            e,
            model,
            dl,
        })
    }

    fn frobenius(&self) -> f64 {
        self.e.values().iter().map(|x| x * x).sum()
    }
}

fn descend(x: &Array2<f64>, grad: &Array2<f64>, lr: f64, delta: f64) -> Array2<f64> {
    let floor = delta / 2.0;
    let mut out = x.clone();
    Zip::from(&mut out).and(grad).for_each(|o, &g| {
        let next = *o - lr * g;
        *o = if next < floor { floor } else { next };
    });
    out
}

fn mean_abs(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x.abs()).sum::<f64>() / m.len() as f64
}

/// Run the solver.
pub fn mdl_nmf(v: &DataMatrix, config: &SolverConfig, strategy: &InitStrategy) -> Result<Solution> {
    mdl_nmf_observed(v, config, strategy, |_, _| {})
}

/// As [`mdl_nmf`], calling `observe(iteration, factors)` on the initial state
/// and after every accepted step.
pub fn mdl_nmf_observed<F>(
    v: &DataMatrix,
    config: &SolverConfig,
    strategy: &InitStrategy,
    mut observe: F,
) -> Result<Solution>
where
    F: FnMut(usize, &FactorPair),
{
    config.validate()?;
    let (m, n) = v.shape();
    let r = config.rank;
    if m * r < 2 || r * n < 2 || m * n < 2 {
        return Err(Error::InvalidConfig(format!(
            "a {m}×{n} matrix at rank {r} leaves a factor with fewer than two entries"
        )));
    }
    if r >= m.min(n) {
        log::warn!("rank {r} is not small compared to the {m}×{n} data matrix");
    }
    let delta = config.delta.resolve(v);
    let start = clamp_factors(&init_factors(v, config, strategy)?, delta);
    let mut state = State::evaluate(v, start, delta)?;
    if !state.dl.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }

    let (mut lr_w, mut lr_h) = initial_learning_rates(v, config, &state)?;
    let mut trace = RunTrace::default();
    trace.push(record(0, &state.dl, state.frobenius(), lr_w, lr_h, true));
    observe(0, &state.factors);

    let mut stop_reason = StopReason::MaxIterations;
    let mut stalled = 0usize;
    for t in 1..=config.max_iterations {
        if lr_w < config.min_learning_rate && lr_h < config.min_learning_rate {
            stop_reason = StopReason::LearningRateFloor;
            break;
        }

        let gw = grad_w(&state.factors, &state.e, &state.model)?;
        let w = descend(&state.factors.w, &gw, lr_w, delta);
        let mid = FactorPair {
            w,
            h: state.factors.h.clone(),
        };
        let e_mid = residual(v, &mid)?;
        let gh = grad_h(&mid, &e_mid, &state.model)?;
        let h = descend(&mid.h, &gh, lr_h, delta);
        let candidate = State::evaluate(v, FactorPair { w: mid.w, h }, delta)?;
        if !candidate.dl.is_finite() {
            return Err(Error::Diverged { iteration: t });
        }

        let frob = candidate.frobenius();
        if candidate.dl.total >= state.dl.total {
            trace.push(record(t, &candidate.dl, frob, lr_w, lr_h, false));
            lr_w *= config.lr_reduction_factor;
            lr_h *= config.lr_reduction_factor;
            continue;
        }

        let previous = state.dl.total;
        state = candidate;
        trace.push(record(t, &state.dl, frob, lr_w, lr_h, true));
        observe(t, &state.factors);

        let improvement = if previous != 0.0 {
            (previous - state.dl.total) / previous.abs()
        } else {
            0.0
        };
        if improvement < config.stop_rel_tol {
            stalled += 1;
            if stalled >= config.stop_patience {
                stop_reason = StopReason::Stalled;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    // Accepted objectives strictly decrease, so the current state is the best one.
    Ok(Solution {
        factors: state.factors,
        model: state.model,
        description_length: state.dl,
        trace,
        stop_reason,
    })
}

fn initial_learning_rates(v: &DataMatrix, config: &SolverConfig, state: &State) -> Result<(f64, f64)> {
    if let (Some(w), Some(h)) = (config.learning_rate_w, config.learning_rate_h) {
        return Ok((w, h));
    }
    let gw = grad_w(&state.factors, &state.e, &state.model)?;
    let gh = grad_h(&state.factors, &state.e, &state.model)?;
    let count = (gw.len() + gh.len()) as f64;
    let mean_grad = (mean_abs(&gw) * gw.len() as f64 + mean_abs(&gh) * gh.len() as f64) / count;
    let scale = if mean_grad > 0.0 && mean_grad.is_finite() {
        v.mean().max(f64::MIN_POSITIVE) / mean_grad
    } else {
        1.0
    };
    let auto = 1e-3 * scale;
    Ok((
        config.learning_rate_w.unwrap_or(auto),
        config.learning_rate_h.unwrap_or(auto),
    ))
}

fn record(
    iteration: usize,
    dl: &DescriptionLength,
    frobenius_error: f64,
    learning_rate_w: f64,
    learning_rate_h: f64,
    accepted: bool,
) -> TraceRecord {
    TraceRecord {
        iteration,
        objective: dl.total,
        l_w: dl.l_w,
        l_h: dl.l_h,
        l_e: dl.l_e,
        frobenius_error,
        learning_rate_w,
        learning_rate_h,
        accepted,
    }
}
