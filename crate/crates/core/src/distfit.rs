//! Code-length models for factor and residual entries.
//!
//! Factor entries are coded under a gamma density and residual entries under
//! a Gaussian. A continuous density `ρ` turns into a probability by
//! quantizing to the precision `δ`: `P(x) = min(ρ(x)·δ, 1)`, so each element
//! costs `−log₂ P(x) ≥ 0` bits. The histogram estimator gives the
//! non-parametric alternative `P(x) = b(x)/N` and is used for reporting only.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, ln_minus_digamma, trigamma};

/// Largest gamma shape the MLE will return. Near-constant samples push the
/// shape towards infinity; the fit is capped here instead of failing.
pub const ALPHA_MAX: f64 = 1e6;

/// Relative floor on a fitted Gaussian scale, as a fraction of the sample range.
pub const SIGMA_FLOOR_FRACTION: f64 = 1e-9;

const GAMMA_MAX_ITER: usize = 200;
const GAMMA_TOL: f64 = 1e-10;

/// Gamma density `ρ(x) = βᵅ/Γ(α) · x^(α−1) e^(−βx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    /// α
    pub shape: f64,
    /// β
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma parameters must be positive and finite (shape {shape}, rate {rate})"
            )));
        }
        Ok(GammaParams { shape, rate })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_normalizer() + (self.shape - 1.0) * x.ln() - self.rate * x
    }

    fn ln_normalizer(&self) -> f64 {
        self.shape * self.rate.ln() - ln_gamma(self.shape)
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// Gaussian density with mean μ and standard deviation σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    pub mean: f64,
    pub std_dev: f64,
}

impl GaussianParams {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self> {
        if !(mean.is_finite() && std_dev.is_finite() && std_dev > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gaussian parameters must be finite with positive scale (mean {mean}, std {std_dev})"
            )));
        }
        Ok(GaussianParams { mean, std_dev })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std_dev;
        -0.5 * z * z - self.std_dev.ln() - 0.5 * (2.0 * PI).ln()
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteSample { index }),
        None => Ok(()),
    }
}

fn check_positive(samples: &[f64]) -> Result<()> {
    check_finite(samples)?;
    match samples.iter().position(|&x| x <= 0.0) {
        Some(index) => Err(Error::NonPositiveSample {
            index,
            value: samples[index],
        }),
        None => Ok(()),
    }
}

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Lower bound applied to a fitted σ. A zero-range sample falls back to a
/// floor relative to the magnitude of its value (or 1).
pub fn sigma_floor(samples: &[f64]) -> f64 {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi - lo;
    if range > 0.0 {
        SIGMA_FLOOR_FRACTION * range
    } else {
        SIGMA_FLOOR_FRACTION * lo.abs().max(1.0)
    }
}

/// Maximum-likelihood Gaussian: sample mean and population standard deviation,
/// floored at [`sigma_floor`].
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianParams> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    check_finite(samples)?;
    let mu = mean(samples);
    let var = samples.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / samples.len() as f64;
    let sigma = var.sqrt().max(sigma_floor(samples));
    Ok(GaussianParams {
        mean: mu,
        std_dev: sigma,
    })
}

/// Maximum-likelihood gamma fit.
///
/// Solves `ln α − ψ(α) = ln(mean) − mean(ln x)` by Newton's method from the
/// closed-form approximation `α₀ = (3 − s + √((s−3)² + 24s)) / (12s)`, then sets
/// `β = α / mean`. Near-constant samples (where `s` vanishes) return
/// `α = ALPHA_MAX`.
pub fn fit_gamma(samples: &[f64]) -> Result<GammaParams> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    check_positive(samples)?;
    let m = mean(samples);
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / samples.len() as f64;
    let s = m.ln() - mean_ln;

    let alpha = if s <= 0.0 {
        // Jensen gap is zero up to rounding: constant sample.
        ALPHA_MAX
    } else {
        newton_gamma_shape(s)?
    };
    Ok(GammaParams {
        shape: alpha,
        rate: alpha / m,
    })
}

fn newton_gamma_shape(s: f64) -> Result<f64> {
    let mut alpha = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    if alpha >= ALPHA_MAX {
        return Ok(ALPHA_MAX);
    }
    for _ in 0..GAMMA_MAX_ITER {
        let g = ln_minus_digamma(alpha) - s;
        let dg = 1.0 / alpha - trigamma(alpha);
        let mut next = alpha - g / dg;
        if next <= 0.0 {
            next = alpha / 2.0;
        }
        if next >= ALPHA_MAX {
            return Ok(ALPHA_MAX);
        }
        let converged = (next - alpha).abs() <= GAMMA_TOL * alpha;
        alpha = next;
        if converged {
            return Ok(alpha);
        }
    }
    Err(Error::NoConvergence {
        what: "gamma shape estimate",
        iterations: GAMMA_MAX_ITER,
    })
}

/// Bits to code one element whose density is `exp(ln_density)` at precision `delta`.
#[inline]
fn element_bits(ln_density: f64, ln_delta: f64) -> f64 {
    (-(ln_density + ln_delta) / LN_2).max(0.0)
}

/// `Σ −log₂ min(ρ(x)·δ, 1)` under a gamma density. Samples must be positive.
pub fn code_length_gamma(samples: &[f64], params: &GammaParams, delta: f64) -> Result<f64> {
    check_positive(samples)?;
    let ln_delta = delta.ln();
    let norm = params.ln_normalizer();
    Ok(samples
        .iter()
        .map(|&x| {
            let ln_rho = norm + (params.shape - 1.0) * x.ln() - params.rate * x;
            element_bits(ln_rho, ln_delta)
        })
        .sum())
}

/// `Σ −log₂ min(φ(x)·δ, 1)` under a Gaussian density.
pub fn code_length_gaussian(samples: &[f64], params: &GaussianParams, delta: f64) -> Result<f64> {
    check_finite(samples)?;
    let ln_delta = delta.ln();
    Ok(samples
        .iter()
        .map(|&x| element_bits(params.ln_pdf(x), ln_delta))
        .sum())
}

/// Uniform-width histogram anchored at the sample minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub origin: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// Edges `origin, origin + δ, …`; one more than the number of bins.
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| self.origin + i as f64 * self.bin_width)
            .collect()
    }

    /// Bin holding `x`. Bins are right-open except the last, which also takes
    /// everything at or beyond its upper edge.
    pub fn bin_index(&self, x: f64) -> usize {
        let raw = ((x - self.origin) / self.bin_width).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.counts.len() - 1)
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn probability(&self, x: f64) -> f64 {
        self.counts[self.bin_index(x)] as f64 / self.total as f64
    }
}

/// Sort samples into bins of width `delta` spanning `[min, max]`.
pub fn build_histogram(samples: &[f64], delta: f64) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bin width must be positive, got {delta}"
        )));
    }
    check_finite(samples)?;
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let bins = (((hi - lo) / delta).ceil() as usize).max(1);
    let mut hist = Histogram {
        bin_width: delta,
        origin: lo,
        counts: vec![0; bins],
        total: samples.len() as u64,
    };
    for &x in samples {
        let i = hist.bin_index(x);
        hist.counts[i] += 1;
    }
    Ok(hist)
}

/// Shannon code length `Σ −log₂(b(x)/N)` under the histogram estimate.
pub fn code_length_histogram(samples: &[f64], delta: f64) -> Result<f64> {
    let hist = build_histogram(samples, delta)?;
    let n = hist.total as f64;
    Ok(samples
        .iter()
        .map(|&x| -(hist.counts[hist.bin_index(x)] as f64 / n).log2())
        .sum())
}
