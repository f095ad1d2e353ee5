//! Signal-versus-noise experiments over a grid of noise levels, ranks,
//! seeds, dataset variants and methods.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mdlnmf_core::baselines::{mu_nmf, snmf};
use mdlnmf_core::solver::{auto_delta, mdl_nmf_observed};
use mdlnmf_core::synthgen::{
    generate_standin, make_semisynthetic, noise_error, normalize_trace, true_error, NormalizedTrace,
    SemiSyntheticParams, SemiSyntheticSet, StandinKind, Variant,
};
use mdlnmf_core::{DataMatrix, FactorPair, InitStrategy, SolverConfig};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::io::{create_dir, load_matrix, write_text, LoadOptions};
use crate::runs::bits_for;

/// Offset between the generator seed and the seed of the fitting runs, so a
/// baseline never starts from the generator's own initialization.
pub const FIT_SEED_OFFSET: u64 = 1000;

/// Warm-start noise as a fraction of the mean entry of the source factors,
/// used when no absolute level is given.
pub const DEFAULT_WARM_NOISE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mdl,
    Mu,
    Snmf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mdl, Method::Mu, Method::Snmf];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mdl => "mdl",
            Method::Mu => "mu",
            Method::Snmf => "snmf",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct SemisynthGrid {
    pub noise_sigmas: Vec<f64>,
    pub generator_ranks: Vec<usize>,
    /// Ranks used for fitting; `None` fits at the generating rank.
    pub fit_ranks: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub variants: Vec<Variant>,
    pub generator_iterations: usize,
    /// Iterations for MU (also the warm-start source) and sNMF.
    pub baseline_iterations: usize,
    /// Template for the MDL solver; rank and seed are set per run.
    pub mdl: SolverConfig,
    /// Absolute warm-start noise; `None` uses [`DEFAULT_WARM_NOISE_FRACTION`].
    pub warm_noise: Option<f64>,
}

impl Default for SemisynthGrid {
    fn default() -> Self {
        let mut mdl = SolverConfig::new(1);
        mdl.max_iterations = 2000;
        SemisynthGrid {
            noise_sigmas: vec![0.1, 0.3, 0.6],
            generator_ranks: vec![3, 5],
            fit_ranks: None,
            seeds: (0..5).collect(),
            methods: Method::ALL.to_vec(),
            variants: vec![Variant::Plain],
            generator_iterations: 500,
            baseline_iterations: 1000,
            mdl,
            warm_noise: None,
        }
    }
}

impl SemisynthGrid {
    fn validate(&self) -> Result<()> {
        let empty = |name: &str| Err(HarnessError::Usage(format!("semisynth axis `{name}` is empty")));
        if self.noise_sigmas.is_empty() {
            return empty("noise");
        }
        if self.generator_ranks.is_empty() {
            return empty("r-gen");
        }
        if self.fit_ranks.as_ref().is_some_and(|r| r.is_empty()) {
            return empty("r-fit");
        }
        if self.seeds.is_empty() {
            return empty("seeds");
        }
        if self.methods.is_empty() {
            return empty("methods");
        }
        if self.variants.is_empty() {
            return empty("variants");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub variant: Variant,
    pub noise_sigma: f64,
    pub r_gen: usize,
    pub r_fit: usize,
    pub seed: u64,
    pub true_error: f64,
    pub noise_error: f64,
    pub final_bits: f64,
    /// Normalized per-iteration series.
    pub trace: NormalizedTrace,
}

impl RunRecord {
    pub fn below_diagonal(&self) -> bool {
        self.true_error < self.noise_error
    }

    pub fn trace_name(&self) -> String {
        format!(
            "{}_{}_n{}_g{}_f{}_s{}",
            self.method.name(),
            self.variant.name(),
            self.noise_sigma,
            self.r_gen,
            self.r_fit,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    variant: Variant,
    noise_sigma: f64,
    r_gen: usize,
    seed: u64,
}

fn mean_entry(f: &FactorPair) -> f64 {
    (f.w.sum() + f.h.sum()) / (f.w.len() + f.h.len()) as f64
}

fn record(
    method: Method,
    cell: &Cell,
    r_fit: usize,
    set: &SemiSyntheticSet,
    factors: &FactorPair,
    final_bits: f64,
    trace: NormalizedTrace,
) -> Result<RunRecord> {
    Ok(RunRecord {
        method,
        variant: cell.variant,
        noise_sigma: cell.noise_sigma,
        r_gen: cell.r_gen,
        r_fit,
        seed: cell.seed,
        true_error: true_error(factors, set)?,
        noise_error: noise_error(factors, set)?,
        final_bits,
        trace,
    })
}

fn error_trace(errors: &[f64]) -> Result<NormalizedTrace> {
    let mut t = NormalizedTrace {
        iterations: (0..errors.len()).collect(),
        series: Vec::new(),
    };
    t.push_series("noise_error", errors)?;
    Ok(t)
}

fn run_cell(v: &DataMatrix, grid: &SemisynthGrid, cell: &Cell) -> Result<Vec<RunRecord>> {
    let mut params = SemiSyntheticParams::new(cell.r_gen, cell.noise_sigma, cell.variant, cell.seed);
    params.generator_iterations = grid.generator_iterations;
    let set = make_semisynthetic(v, &params)?;
    let delta = auto_delta(&set.v_noise);
    let fit_seed = cell.seed.wrapping_add(FIT_SEED_OFFSET);
    let fit_ranks = grid.fit_ranks.clone().unwrap_or_else(|| vec![cell.r_gen]);

    let mut out = Vec::new();
    for &r_fit in &fit_ranks {
        let mu = mu_nmf(&set.v_noise, r_fit, grid.baseline_iterations, fit_seed)?;
        for &method in &grid.methods {
            let rec = match method {
                Method::Mu => {
                    let bits = bits_for(&set.v_noise, &mu.factors, delta)?.total;
                    record(method, cell, r_fit, &set, &mu.factors, bits, error_trace(&mu.error_trace)?)?
                }
                Method::Snmf => {
                    let targets = set.true_sparseness()?;
                    let sn = snmf(&set.v_noise, r_fit, targets, grid.baseline_iterations, fit_seed)?;
                    let bits = bits_for(&set.v_noise, &sn.factors, delta)?.total;
                    record(method, cell, r_fit, &set, &sn.factors, bits, error_trace(&sn.error_trace)?)?
                }
                Method::Mdl => {
                    let config = SolverConfig {
                        rank: r_fit,
                        seed: fit_seed,
                        ..grid.mdl.clone()
                    };
                    let noise = grid
                        .warm_noise
                        .unwrap_or(DEFAULT_WARM_NOISE_FRACTION * mean_entry(&mu.factors));
                    let strategy = InitStrategy::WarmStart {
                        source: mu.factors.clone(),
                        noise_sigma: noise,
                    };
                    let mut te = Vec::new();
                    let mut ne = Vec::new();
                    let sol = mdl_nmf_observed(&set.v_noise, &config, &strategy, |_, f| {
                        te.push(true_error(f, &set).unwrap_or(f64::NAN));
                        ne.push(noise_error(f, &set).unwrap_or(f64::NAN));
                    })?;
                    let mut trace = normalize_trace(&sol.trace)?;
                    trace.push_series("true_error", &te)?;
                    trace.push_series("noise_error", &ne)?;
                    record(
                        method,
                        cell,
                        r_fit,
                        &set,
                        &sol.factors,
                        sol.description_length.total,
                        trace,
                    )?
                }
            };
            out.push(rec);
        }
    }
    Ok(out)
}

/// Run every grid cell concurrently. Output order follows the grid order
/// (variant, noise, generating rank, seed, fitting rank, method) regardless
/// of scheduling.
pub fn run_grid(v: &DataMatrix, grid: &SemisynthGrid) -> Result<Vec<RunRecord>> {
    grid.validate()?;
    let mut cells = Vec::new();
    for &variant in &grid.variants {
        for &noise_sigma in &grid.noise_sigmas {
            for &r_gen in &grid.generator_ranks {
                for &seed in &grid.seeds {
                    cells.push(Cell {
                        variant,
                        noise_sigma,
                        r_gen,
                        seed,
                    });
                }
            }
        }
    }
    let nested = cells
        .par_iter()
        .map(|cell| run_cell(v, grid, cell))
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub enum DataSource {
    File { path: PathBuf, load: LoadOptions },
    Standin { kind: StandinKind, rows: usize, cols: usize, seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> Result<DataMatrix> {
        match self {
            DataSource::File { path, load } => load_matrix(path, load),
            DataSource::Standin {
                kind,
                rows,
                cols,
                seed,
            } => Ok(generate_standin(*kind, *rows, *cols, *seed)?),
        }
    }
}

pub const SCATTER_HEADER: &str =
    "method,variant,noise_sigma,r_gen,r_fit,seed,true_error,noise_error,final_bits";

pub fn scatter_csv(records: &[RunRecord]) -> String {
    let mut s = format!("{SCATTER_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method.name(),
            r.variant.name(),
            r.noise_sigma,
            r.r_gen,
            r.r_fit,
            r.seed,
            r.true_error,
            r.noise_error,
            r.final_bits
        );
    }
    s
}

pub fn normalized_trace_csv(trace: &NormalizedTrace) -> String {
    let mut s = String::from("iteration");
    for (name, _) in &trace.series {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, it) in trace.iterations.iter().enumerate() {
        s.push_str(&it.to_string());
        for (_, values) in &trace.series {
            let _ = write!(s, ",{}", values[i]);
        }
        s.push('\n');
    }
    s
}

/// Run the grid and write `scatter.csv` plus one normalized trace per run
/// under `traces/`.
pub fn run_semisynth(data: &DataSource, grid: &SemisynthGrid, out: &Path) -> Result<Vec<RunRecord>> {
    let v = data.load()?;
    let records = run_grid(&v, grid)?;
    create_dir(out)?;
    let traces = out.join("traces");
    create_dir(&traces)?;
    write_text(&out.join("scatter.csv"), &scatter_csv(&records))?;
    for r in &records {
        write_text(
            &traces.join(format!("{}.csv", r.trace_name())),
            &normalized_trace_csv(&r.trace),
        )?;
    }
    log::info!("{} semi-synthetic runs written to {}", records.len(), out.display());
    Ok(records)
}

/// Median of a non-empty sample; NaN for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
