use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdlnmf::runs::{run_baseline, run_factorize, run_sweep, write_dataset, BaselineSpec, FactorizeSpec, InitSpec, SweepSpec};
use mdlnmf::semisynth::{run_semisynth, DataSource, Method, SemisynthGrid};
use mdlnmf::{io::LoadOptions, output_dir, report::run_report, HarnessError, Result};
use mdlnmf_core::baselines::SparsenessTarget;
use mdlnmf_core::solver::Delta;
use mdlnmf_core::synthgen::{generate_standin, StandinKind, Variant};
use mdlnmf_core::SolverConfig;

#[derive(Parser)]
#[command(name = "mdlnmf", version, about = "Non-negative matrix factorization by minimum description length")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a matrix with the MDL solver.
    Factorize(FactorizeArgs),
    /// Lee–Seung multiplicative updates.
    BaselineMu(BaselineArgs),
    /// Hoyer sparseness-constrained NMF.
    BaselineSnmf(SnmfArgs),
    /// Semi-synthetic signal-versus-noise grid.
    Semisynth(SemisynthArgs),
    /// Factorize at several ranks and seeds.
    Sweep(SweepArgs),
    /// Tables and plots from a semisynth output directory.
    Report(ReportArgs),
    /// Write a bundled stand-in dataset.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Treat rows of the file as data points.
    #[arg(long)]
    transpose: bool,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

impl InputArgs {
    fn options(&self) -> Result<LoadOptions> {
        let delimiter = u8::try_from(self.delimiter)
            .map_err(|_| HarnessError::Usage("--delimiter must be a single ASCII character".into()))?;
        Ok(LoadOptions {
            transpose: self.transpose,
            delimiter,
        })
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Precision: a positive number or `auto`.
    #[arg(long, default_value = "auto")]
    delta: String,
    /// Initial learning rate for both factors; derived from the data if omitted.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long = "lr-reduction", default_value_t = 0.5)]
    lr_reduction: f64,
    #[arg(long = "min-lr", default_value_t = 1e-14)]
    min_lr: f64,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long = "rel-tol", default_value_t = 1e-7)]
    rel_tol: f64,
}

impl SolverArgs {
    fn config(&self, rank: usize, seed: u64) -> Result<SolverConfig> {
        let delta = if self.delta == "auto" {
            Delta::Auto
        } else {
            Delta::Fixed(
                self.delta
                    .parse()
                    .map_err(|_| HarnessError::Usage(format!("--delta expects a number or `auto`, got `{}`", self.delta)))?,
            )
        };
        let config = SolverConfig {
            delta,
            learning_rate_w: self.lr,
            learning_rate_h: self.lr,
            max_iterations: self.max_iter,
            lr_reduction_factor: self.lr_reduction,
            min_learning_rate: self.min_lr,
            stop_patience: self.patience,
            stop_rel_tol: self.rel_tol,
            seed,
            ..SolverConfig::new(rank)
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// `random` or `warm:DIR` (a directory holding W.csv and H.csv).
    #[arg(long, default_value = "random")]
    init: String,
    /// Standard deviation of the noise added to a warm start.
    #[arg(long = "warm-noise", default_value_t = 0.0)]
    warm_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    rank: usize,
    #[arg(long = "max-iter", default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SnmfArgs {
    #[command(flatten)]
    base: BaselineArgs,
    /// Target sparseness of W columns.
    #[arg(long = "sparseness-w")]
    sparseness_w: Option<f64>,
    /// Target sparseness of H rows.
    #[arg(long = "sparseness-h")]
    sparseness_h: Option<f64>,
}

#[derive(Args)]
struct SemisynthArgs {
    /// Base matrix; a stand-in is generated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    transpose: bool,
    #[arg(long, default_value = "faces")]
    standin: String,
    #[arg(long, default_value_t = 50)]
    rows: usize,
    #[arg(long, default_value_t = 40)]
    cols: usize,
    #[arg(long = "data-seed", default_value_t = 0)]
    data_seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.6])]
    noise: Vec<f64>,
    #[arg(long = "r-gen", value_delimiter = ',', default_values_t = [3usize, 5])]
    r_gen: Vec<usize>,
    /// Fitting ranks; the generating rank when omitted.
    #[arg(long = "r-fit", value_delimiter = ',')]
    r_fit: Option<Vec<usize>>,
    #[arg(long = "seed", value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    #[arg(long = "method", value_delimiter = ',', default_values_t = ["mdl".to_string(), "mu".to_string(), "snmf".to_string()])]
    methods: Vec<String>,
    #[arg(long = "variant", value_delimiter = ',', default_values_t = ["plain".to_string()])]
    variants: Vec<String>,
    #[arg(long = "baseline-iter", default_value_t = 1000)]
    baseline_iter: usize,
    #[arg(long = "max-iter", default_value_t = 2000)]
    max_iter: usize,
    /// Absolute warm-start noise; 5% of the mean factor entry when omitted.
    #[arg(long = "warm-noise")]
    warm_noise: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "rank", value_delimiter = ',', required = true)]
    ranks: Vec<usize>,
    #[arg(long = "seed", value_delimiter = ',', default_values_t = [0u64])]
    seeds: Vec<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A semisynth output directory.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// faces, transcriptome or ftse.
    #[arg(long, default_value = "faces")]
    kind: String,
    /// Defaults to the kind's desk-scale shape.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<StandinKind> {
    StandinKind::parse(s).ok_or_else(|| HarnessError::Usage(format!("unknown dataset kind `{s}`")))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Factorize(a) => {
            let mut init = InitSpec::parse(&a.init)?;
            if let InitSpec::Warm { noise, .. } = &mut init {
                *noise = a.warm_noise;
            }
            let spec = FactorizeSpec {
                load: a.input.options()?,
                input: a.input.input,
                config: a.solver.config(a.rank, a.seed)?,
                init,
                out: output_dir(a.out, "factorize"),
            };
            let sol = run_factorize(&spec)?;
            println!(
                "{:.3} bits (W {:.3}, H {:.3}, E {:.3}); output in {}",
                sol.description_length.total,
                sol.description_length.l_w,
                sol.description_length.l_h,
                sol.description_length.l_e,
                spec.out.display()
            );
        }
        Command::BaselineMu(a) => {
            let spec = BaselineSpec {
                load: a.input.options()?,
                input: a.input.input,
                rank: a.rank,
                iterations: a.max_iter,
                seed: a.seed,
                sparseness: None,
                out: output_dir(a.out, "baseline-mu"),
            };
            let res = run_baseline(&spec)?;
            println!("frobenius error {}; output in {}", res.final_error(), spec.out.display());
        }
        Command::BaselineSnmf(a) => {
            let targets = SparsenessTarget {
                sparseness_w: a.sparseness_w,
                sparseness_h: a.sparseness_h,
            };
            let b = a.base;
            let spec = BaselineSpec {
                load: b.input.options()?,
                input: b.input.input,
                rank: b.rank,
                iterations: b.max_iter,
                seed: b.seed,
                sparseness: Some(targets),
                out: output_dir(b.out, "baseline-snmf"),
            };
            let res = run_baseline(&spec)?;
            println!("frobenius error {}; output in {}", res.final_error(), spec.out.display());
        }
        Command::Semisynth(a) => {
            let data = match a.input {
                Some(path) => DataSource::File {
                    path,
                    load: LoadOptions {
                        transpose: a.transpose,
                        ..LoadOptions::default()
                    },
                },
                None => DataSource::Standin {
                    kind: parse_kind(&a.standin)?,
                    rows: a.rows,
                    cols: a.cols,
                    seed: a.data_seed,
                },
            };
            let methods = a
                .methods
                .iter()
                .map(|m| Method::parse(m).ok_or_else(|| HarnessError::Usage(format!("unknown method `{m}`"))))
                .collect::<Result<Vec<_>>>()?;
            let variants = a
                .variants
                .iter()
                .map(|v| Variant::parse(v).ok_or_else(|| HarnessError::Usage(format!("unknown variant `{v}`"))))
                .collect::<Result<Vec<_>>>()?;
            let mut grid = SemisynthGrid {
                noise_sigmas: a.noise,
                generator_ranks: a.r_gen,
                fit_ranks: a.r_fit,
                seeds: a.seeds,
                methods,
                variants,
                baseline_iterations: a.baseline_iter,
                warm_noise: a.warm_noise,
                ..SemisynthGrid::default()
            };
            grid.mdl.max_iterations = a.max_iter;
            let out = output_dir(a.out, "semisynth");
            let records = run_semisynth(&data, &grid, &out)?;
            let below = records.iter().filter(|r| r.below_diagonal()).count();
            println!(
                "{} runs, {below} with true error below noise error; output in {}",
                records.len(),
                out.display()
            );
        }
        Command::Sweep(a) => {
            let spec = SweepSpec {
                load: a.input.options()?,
                input: a.input.input,
                base: a.solver.config(a.ranks.first().copied().unwrap_or(1), 0)?,
                ranks: a.ranks,
                seeds: a.seeds,
                out: output_dir(a.out, "sweep"),
            };
            let rows = run_sweep(&spec)?;
            if let Some(best) = rows.iter().min_by(|x, y| x.bits.total.total_cmp(&y.bits.total)) {
                println!(
                    "shortest description: rank {} seed {} at {:.3} bits; output in {}",
                    best.rank,
                    best.seed,
                    best.bits.total,
                    spec.out.display()
                );
            }
        }
        Command::Report(a) => {
            let out = output_dir(a.out, "report");
            let summary = run_report(&a.input, &out)?;
            println!(
                "{} runs, fraction below diagonal {}; output in {}",
                summary.runs,
                summary.fraction_below_diagonal,
                out.display()
            );
        }
        Command::Generate(a) => {
            let kind = parse_kind(&a.kind)?;
            let (dr, dc) = kind.desk_shape();
            let m = generate_standin(kind, a.rows.unwrap_or(dr), a.cols.unwrap_or(dc), a.seed)?;
            let path = a
                .out
                .unwrap_or_else(|| output_dir(None, "generate").join(format!("{}.csv", kind.name())));
            write_dataset(&path, m.values())?;
            println!("{}×{} {} stand-in written to {}", m.rows(), m.cols(), kind.name(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
