//! Semi-synthetic data with known structure, and the error metrics used to
//! tell signal recovery from noise fitting.
//!
//! A real (or stand-in) matrix is factorized, the product of the factors is
//! taken as the noise-free truth `V_true`, and Gaussian noise is added to get
//! `V_noise`. A factorization of `V_noise` that is closer to `V_true` than to
//! `V_noise` has picked up signal rather than noise.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::baselines::{hoyer_sparseness, mu_nmf, snmf, SparsenessTarget};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_sq, validate_nonneg, DataMatrix, FactorPair, RunTrace};

/// Sparseness of the generating `W` columns for [`Variant::SparseGenerated`].
pub const SPARSE_GENERATOR_SPARSENESS: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    /// Generating `W` columns passed through a window-3 moving average.
    Smoothed,
    /// Generating factors from sparseness-constrained NMF.
    SparseGenerated,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Plain, Variant::Smoothed, Variant::SparseGenerated];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Smoothed => "smoothed",
            Variant::SparseGenerated => "sparse",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiSyntheticParams {
    pub generator_rank: usize,
    /// Noise standard deviation as a multiple of `std(V_true)`.
    pub noise_sigma: f64,
    pub variant: Variant,
    pub seed: u64,
    pub generator_iterations: usize,
}

impl SemiSyntheticParams {
    pub fn new(generator_rank: usize, noise_sigma: f64, variant: Variant, seed: u64) -> Self {
        SemiSyntheticParams {
            generator_rank,
            noise_sigma,
            variant,
            seed,
            generator_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemiSyntheticSet {
    pub v_true: DataMatrix,
    pub v_noise: DataMatrix,
    pub w_true: Array2<f64>,
    pub h_true: Array2<f64>,
    pub noise_sigma: f64,
    pub variant: Variant,
    pub generator_rank: usize,
}

impl SemiSyntheticSet {
    pub fn generating_factors(&self) -> FactorPair {
        FactorPair {
            w: self.w_true.clone(),
            h: self.h_true.clone(),
        }
    }

    /// Mean Hoyer sparseness of the generating `W` columns and `H` rows.
    pub fn true_sparseness(&self) -> Result<SparsenessTarget> {
        let mean_over = |lanes: Vec<Vec<f64>>| -> Result<f64> {
            let n = lanes.len() as f64;
            let mut total = 0.0;
            for lane in lanes {
                total += hoyer_sparseness(&lane)?;
            }
            Ok(total / n)
        };
        Ok(SparsenessTarget {
            sparseness_w: Some(mean_over(
                self.w_true.columns().into_iter().map(|c| c.to_vec()).collect(),
            )?),
            sparseness_h: Some(mean_over(
                self.h_true.rows().into_iter().map(|r| r.to_vec()).collect(),
            )?),
        })
    }
}

fn smooth_columns(w: &Array2<f64>) -> Array2<f64> {
    let m = w.nrows();
    Array2::from_shape_fn(w.dim(), |(i, j)| {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(m - 1);
        (lo..=hi).map(|k| w[[k, j]]).sum::<f64>() / (hi - lo + 1) as f64
    })
}

fn population_std(values: &Array2<f64>) -> f64 {
    let n = values.len() as f64;
    let mean = values.sum() / n;
    (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Factorize `v`, rebuild it from the factors and add clamped Gaussian noise.
pub fn make_semisynthetic(v: &DataMatrix, params: &SemiSyntheticParams) -> Result<SemiSyntheticSet> {
    if !(params.noise_sigma >= 0.0 && params.noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise level must be non-negative, got {}",
            params.noise_sigma
        )));
    }
    let generated = match params.variant {
        Variant::SparseGenerated => {
            let targets = SparsenessTarget {
                sparseness_w: Some(SPARSE_GENERATOR_SPARSENESS),
                sparseness_h: None,
            };
            snmf(v, params.generator_rank, targets, params.generator_iterations, params.seed)?
        }
        _ => mu_nmf(v, params.generator_rank, params.generator_iterations, params.seed)?,
    };
    let mut factors = generated.factors;
    if params.variant == Variant::Smoothed {
        factors.w = smooth_columns(&factors.w);
    }
    let v_true = factors.product();

    let mut v_noise = v_true.clone();
    if params.noise_sigma > 0.0 {
        let scale = params.noise_sigma * population_std(&v_true);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(1);
        if scale > 0.0 {
            let normal = Normal::new(0.0, scale)
                .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
            v_noise.mapv_inplace(|x| (x + normal.sample(&mut rng)).max(0.0));
        }
    }

    Ok(SemiSyntheticSet {
        v_true: validate_nonneg(v_true)?,
        v_noise: validate_nonneg(v_noise)?,
        w_true: factors.w,
        h_true: factors.h,
        noise_sigma: params.noise_sigma,
        variant: params.variant,
        generator_rank: params.generator_rank,
    })
}

/// `‖V_true − WH‖²`
pub fn true_error(factors: &FactorPair, set: &SemiSyntheticSet) -> Result<f64> {
    factors.check_against(set.v_true.shape())?;
    frobenius_sq(&set.v_true.view(), &factors.product().view())
}

/// `‖V_noise − WH‖²`
pub fn noise_error(factors: &FactorPair, set: &SemiSyntheticSet) -> Result<f64> {
    factors.check_against(set.v_noise.shape())?;
    frobenius_sq(&set.v_noise.view(), &factors.product().view())
}

/// Series rescaled so that each starts at exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTrace {
    pub iterations: Vec<usize>,
    pub series: Vec<(String, Vec<f64>)>,
}

impl NormalizedTrace {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
    }

    /// Append an extra series (e.g. true error per iteration).
    pub fn push_series(&mut self, name: &str, values: &[f64]) -> Result<()> {
        if values.len() != self.iterations.len() {
            return Err(Error::ShapeMismatch {
                expected: (self.iterations.len(), 1),
                found: (values.len(), 1),
            });
        }
        self.series
            .push((name.to_string(), normalize_series(name, values)?));
        Ok(())
    }
}

/// Divide every value by the first one.
pub fn normalize_series(name: &str, values: &[f64]) -> Result<Vec<f64>> {
    let Some(&first) = values.first() else {
        return Ok(Vec::new());
    };
    if first == 0.0 || !first.is_finite() {
        return Err(Error::ZeroInitialValue {
            series: name.to_string(),
        });
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, &x)| if i == 0 { 1.0 } else { x / first })
        .collect())
}

/// Normalize the accepted steps of a solver trace: objective, the three code
/// lengths and the Frobenius error.
pub fn normalize_trace(trace: &RunTrace) -> Result<NormalizedTrace> {
    let accepted: Vec<_> = trace.accepted().collect();
    let column = |f: fn(&crate::matrix::TraceRecord) -> f64| -> Vec<f64> {
        accepted.iter().map(|r| f(r)).collect()
    };
    let mut out = NormalizedTrace {
        iterations: accepted.iter().map(|r| r.iteration).collect(),
        series: Vec::new(),
    };
    out.push_series("objective", &column(|r| r.objective))?;
    out.push_series("l_w", &column(|r| r.l_w))?;
    out.push_series("l_h", &column(|r| r.l_h))?;
    out.push_series("l_e", &column(|r| r.l_e))?;
    out.push_series("frobenius_error", &column(|r| r.frobenius_error))?;
    Ok(out)
}

/// Shape families for the bundled stand-in datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StandinKind {
    /// Pixel images built from a few additive blob-shaped parts.
    Faces,
    /// Gene-by-sample expression with two sample groups.
    Transcriptome,
    /// Daily closing prices of correlated stocks.
    Ftse,
}

impl StandinKind {
    pub const ALL: [StandinKind; 3] = [StandinKind::Faces, StandinKind::Transcriptome, StandinKind::Ftse];

    pub fn name(&self) -> &'static str {
        match self {
            StandinKind::Faces => "faces",
            StandinKind::Transcriptome => "transcriptome",
            StandinKind::Ftse => "ftse",
        }
    }

    pub fn parse(s: &str) -> Option<StandinKind> {
        StandinKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Desk-scale shape with roughly the m/n ratio of the full dataset
    /// (faces 361×2429, transcriptome 5000×38, FTSE 1305×94).
    pub fn desk_shape(&self) -> (usize, usize) {
        match self {
            StandinKind::Faces => (49, 330),
            StandinKind::Transcriptome => (500, 38),
            StandinKind::Ftse => (280, 20),
        }
    }

    /// Full-size shape of the original dataset.
    pub fn full_shape(&self) -> (usize, usize) {
        match self {
            StandinKind::Faces => (361, 2429),
            StandinKind::Transcriptome => (5000, 38),
            StandinKind::Ftse => (1305, 94),
        }
    }
}

/// Generate a non-negative stand-in for one of the reference datasets.
pub fn generate_standin(kind: StandinKind, rows: usize, cols: usize, seed: u64) -> Result<DataMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match kind {
        StandinKind::Faces => faces(rows, cols, &mut rng),
        StandinKind::Transcriptome => transcriptome(rows, cols, &mut rng),
        StandinKind::Ftse => prices(rows, cols, &mut rng),
    };
    validate_nonneg(values)
}

fn faces(pixels: usize, images: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let side = (pixels as f64).sqrt().ceil().max(1.0) as usize;
    let parts = 6;
    let width = side as f64 / 5.0 + 0.5;
    let centres: Vec<(f64, f64)> = (0..parts)
        .map(|_| (rng.random_range(0.0..side as f64), rng.random_range(0.0..side as f64)))
        .collect();
    let basis = Array2::from_shape_fn((pixels, parts), |(p, k)| {
        let (y, x) = ((p / side) as f64, (p % side) as f64);
        let (cy, cx) = centres[k];
        (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * width * width)).exp()
    });
    let coefs = Array2::from_shape_simple_fn((parts, images), || {
        if rng.random_bool(0.6) {
            rng.random_range(0.2..1.0)
        } else {
            0.0
        }
    });
    let mut v = basis.dot(&coefs);
    v.mapv_inplace(|x| x + rng.random_range(0.0..0.05));
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.mapv_inplace(|x| x / max);
    }
    v
}

fn transcriptome(genes: usize, samples: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let baseline = LogNormal::new(4.0, 1.0).expect("valid parameters");
    let noise = LogNormal::new(0.0, 0.2).expect("valid parameters");
    let base: Vec<f64> = (0..genes).map(|_| baseline.sample(rng)).collect();
    let group: Vec<bool> = (0..samples).map(|j| j * 2 < samples).collect();
    let marker: Vec<u8> = (0..genes)
        .map(|_| match rng.random_range(0..10) {
            0 => 1,
            1 => 2,
            _ => 0,
        })
        .collect();
    Array2::from_shape_fn((genes, samples), |(i, j)| {
        let up = match (marker[i], group[j]) {
            (1, true) | (2, false) => 3.0,
            _ => 1.0,
        };
        base[i] * up * noise.sample(rng)
    })
}

fn prices(days: usize, stocks: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let market = Normal::new(0.0, 0.01).expect("valid parameters");
    let idio = Normal::new(0.0, 0.015).expect("valid parameters");
    let mut v = Array2::zeros((days, stocks));
    let start: Vec<f64> = (0..stocks).map(|_| rng.random_range(1.0..20.0)).collect();
    let beta: Vec<f64> = (0..stocks).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut log_price: Vec<f64> = start.iter().map(|p| p.ln()).collect();
    for t in 0..days {
        let m = market.sample(rng);
        for j in 0..stocks {
            if t > 0 {
                log_price[j] += beta[j] * m + idio.sample(rng);
            }
            v[[t, j]] = log_price[j].exp();
        }
    }
    v
}
