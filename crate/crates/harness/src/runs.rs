//! Single-matrix commands: MDL factorization, the two baselines and rank sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mdlnmf_core::baselines::{mu_nmf, snmf, BaselineResult, SparsenessTarget};
use mdlnmf_core::objective::{description_length_parts, residual};
use mdlnmf_core::solver::{auto_delta, clamp_factors, fit_code_model, mdl_nmf};
use mdlnmf_core::{DataMatrix, DescriptionLength, FactorPair, InitStrategy, RunTrace, Solution, SolverConfig};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::io::{create_dir, default_labels, load_matrix, write_matrix, write_text, LoadOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Random,
    /// Directory holding `W.csv` and `H.csv` from an earlier run, plus the
    /// standard deviation of Gaussian noise added to every entry.
    Warm { dir: PathBuf, noise: f64 },
}

impl InitSpec {
    /// `random` or `warm:PATH`.
    pub fn parse(s: &str) -> Result<InitSpec> {
        match s.split_once(':') {
            None if s == "random" => Ok(InitSpec::Random),
            Some(("warm", dir)) if !dir.is_empty() => Ok(InitSpec::Warm {
                dir: PathBuf::from(dir),
                noise: 0.0,
            }),
            _ => Err(HarnessError::Usage(format!(
                "--init expects `random` or `warm:PATH`, got `{s}`"
            ))),
        }
    }

    fn strategy(&self) -> Result<InitStrategy> {
        match self {
            InitSpec::Random => Ok(InitStrategy::RandomUniform),
            InitSpec::Warm { dir, noise } => Ok(InitStrategy::WarmStart {
                source: load_factors(dir)?,
                noise_sigma: *noise,
            }),
        }
    }
}

/// Read `W.csv` and `H.csv` from a run directory.
pub fn load_factors(dir: &Path) -> Result<FactorPair> {
    let opts = LoadOptions::default();
    let w = load_matrix(&dir.join("W.csv"), &opts)?.into_values();
    let h = load_matrix(&dir.join("H.csv"), &opts)?.into_values();
    Ok(FactorPair::new(w, h)?)
}

fn write_factors(out: &Path, factors: &FactorPair, v: &DataMatrix) -> Result<()> {
    let k = default_labels("k", factors.rank());
    write_matrix(&out.join("W.csv"), &factors.w, Some(&k))?;
    write_matrix(&out.join("H.csv"), &factors.h, v.col_labels())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FactorizeSpec {
    pub input: PathBuf,
    pub load: LoadOptions,
    pub config: SolverConfig,
    pub init: InitSpec,
    pub out: PathBuf,
}

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut s = String::from(
        "iteration,objective,l_w,l_h,l_e,frobenius_error,learning_rate_w,learning_rate_h,accepted\n",
    );
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.objective,
            r.l_w,
            r.l_h,
            r.l_e,
            r.frobenius_error,
            r.learning_rate_w,
            r.learning_rate_h,
            u8::from(r.accepted)
        );
    }
    s
}

fn model_txt(sol: &Solution) -> String {
    let m = &sol.model;
    format!(
        "alpha={}\nbeta={}\na={}\nb={}\nmu={}\nsigma={}\ndelta={}\n",
        m.gamma_w.shape, m.gamma_w.rate, m.gamma_h.shape, m.gamma_h.rate, m.gauss_e.mean, m.gauss_e.std_dev, m.delta
    )
}

fn dl_lines(dl: &DescriptionLength) -> String {
    format!(
        "total_bits={}\nl_w={}\nl_h={}\nl_e={}\n",
        dl.total, dl.l_w, dl.l_h, dl.l_e
    )
}

/// Factorize one matrix and write `W.csv`, `H.csv`, `trace.csv`, `model.txt`
/// and `summary.txt` into `spec.out`.
pub fn run_factorize(spec: &FactorizeSpec) -> Result<Solution> {
    let v = load_matrix(&spec.input, &spec.load)?;
    factorize_matrix(&v, &spec.config, &spec.init, &spec.out)
}

pub fn factorize_matrix(v: &DataMatrix, config: &SolverConfig, init: &InitSpec, out: &Path) -> Result<Solution> {
    let strategy = init.strategy()?;
    create_dir(out)?;
    let started = Instant::now();
    let sol = mdl_nmf(v, config, &strategy)?;
    let elapsed = started.elapsed().as_secs_f64();
    write_factors(out, &sol.factors, v)?;
    write_text(&out.join("trace.csv"), &trace_csv(&sol.trace))?;
    write_text(&out.join("model.txt"), &model_txt(&sol))?;
    let frob = sol.trace.accepted().last().map_or(f64::NAN, |r| r.frobenius_error);
    let summary = format!(
        "{}frobenius_error={frob}\nrank={}\niterations={}\naccepted={}\nrejected={}\nstop_reason={:?}\nwall_time_s={elapsed:.3}\n",
        dl_lines(&sol.description_length),
        config.rank,
        sol.trace.len() - 1,
        sol.trace.accepted_count(),
        sol.trace.rejected_count(),
        sol.stop_reason,
    );
    write_text(&out.join("summary.txt"), &summary)?;
    log::info!(
        "rank {}: {:.1} bits after {} iterations",
        config.rank,
        sol.description_length.total,
        sol.trace.len() - 1
    );
    Ok(sol)
}

/// Description length of arbitrary factors under a code model fitted to
/// them, after flooring at `δ/2`.
pub fn bits_for(v: &DataMatrix, factors: &FactorPair, delta: f64) -> Result<DescriptionLength> {
    let f = clamp_factors(factors, delta);
    let e = residual(v, &f)?;
    let model = fit_code_model(&f, &e, delta)?;
    Ok(description_length_parts(&f, &e, &model)?)
}

#[derive(Debug, Clone)]
pub struct BaselineSpec {
    pub input: PathBuf,
    pub load: LoadOptions,
    pub rank: usize,
    pub iterations: usize,
    pub seed: u64,
    /// `None` runs multiplicative updates; otherwise the sparse variant.
    pub sparseness: Option<SparsenessTarget>,
    pub out: PathBuf,
}

pub fn run_baseline(spec: &BaselineSpec) -> Result<BaselineResult> {
    let v = load_matrix(&spec.input, &spec.load)?;
    let result = match spec.sparseness {
        None => mu_nmf(&v, spec.rank, spec.iterations, spec.seed)?,
        Some(t) => snmf(&v, spec.rank, t, spec.iterations, spec.seed)?,
    };
    create_dir(&spec.out)?;
    write_factors(&spec.out, &result.factors, &v)?;
    let mut trace = String::from("iteration,frobenius_error\n");
    for (i, e) in result.error_trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{e}");
    }
    write_text(&spec.out.join("trace.csv"), &trace)?;
    let dl = bits_for(&v, &result.factors, auto_delta(&v))?;
    let summary = format!(
        "{}frobenius_error={}\nrank={}\niterations={}\n",
        dl_lines(&dl),
        result.final_error(),
        spec.rank,
        spec.iterations
    );
    write_text(&spec.out.join("summary.txt"), &summary)?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub input: PathBuf,
    pub load: LoadOptions,
    pub base: SolverConfig,
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rank: usize,
    pub seed: u64,
    pub bits: DescriptionLength,
    pub frobenius_error: f64,
    pub iterations: usize,
}

/// Factorize at every (rank, seed) pair concurrently. Each point writes its
/// own `r{rank}_s{seed}` directory; `sweep.csv` collects the totals.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.ranks.is_empty() || spec.seeds.is_empty() {
        return Err(HarnessError::Usage("sweep needs at least one rank and one seed".into()));
    }
    let v = load_matrix(&spec.input, &spec.load)?;
    create_dir(&spec.out)?;
    let points: Vec<(usize, u64)> = spec
        .ranks
        .iter()
        .flat_map(|&r| spec.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(rank, seed)| {
            let config = SolverConfig {
                rank,
                seed,
                ..spec.base.clone()
            };
            let dir = spec.out.join(format!("r{rank}_s{seed}"));
            let sol = factorize_matrix(&v, &config, &InitSpec::Random, &dir)?;
            Ok(SweepRow {
                rank,
                seed,
                bits: sol.description_length,
                frobenius_error: sol.trace.accepted().last().map_or(f64::NAN, |r| r.frobenius_error),
                iterations: sol.trace.len() - 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("rank,seed,total_bits,l_w,l_h,l_e,frobenius_error,iterations\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.rank, r.seed, r.bits.total, r.bits.l_w, r.bits.l_h, r.bits.l_e, r.frobenius_error, r.iterations
        );
    }
    write_text(&spec.out.join("sweep.csv"), &csv)?;
    Ok(rows)
}

/// Flat helper for writing a stand-in dataset with generic labels.
pub fn write_dataset(path: &Path, values: &Array2<f64>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_matrix(path, values, None)
}
