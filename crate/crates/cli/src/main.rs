use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use momir_core::fit::{self, NoiseKind, SquareWaveOptions};
use momir_core::io::{read_ir_points, read_prices, read_returns, write_atomic, write_series};
use momir_core::regimes::{self, RegimeConfig};
use momir_core::simulate::{self, ProcessSpec};
use momir_core::strategy;
use momir_core::theory::{self, MomentProfile};
use momir_core::timeseries::{self, Period};

#[derive(Parser)]
#[command(
    name = "momir",
    version,
    about = "Information-ratio analysis of time-series momentum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a `date,price` file to weekly log returns.
    Ingest(IngestArgs),
    /// Empirical IR curve of a weekly return file.
    Ir(IrArgs),
    /// Regime segmentation, per-regime statistics and the averaged IR curve.
    Regimes(RegimesArgs),
    /// Monte Carlo IR curve of a process spec.
    Simulate(SimulateArgs),
    /// Fit a model IR curve to an empirical one.
    Fit(FitArgs),
    /// Closed-form IR curve of a stationary profile.
    Theory(TheoryArgs),
}

#[derive(Args)]
struct Range {
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 43)]
    n_max: usize,
}

impl Range {
    fn lookbacks(&self) -> Result<std::ops::RangeInclusive<usize>> {
        ensure!(self.n_min >= 1, "--n-min must be at least 1");
        ensure!(self.n_max >= self.n_min, "--n-max must be at least --n-min");
        Ok(self.n_min..=self.n_max)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Sampling frequency of the input prices.
    #[arg(long, default_value = "daily")]
    frequency: Period,
}

#[derive(Args)]
struct IrArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Normalization window.
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[command(flatten)]
    range: Range,
    #[arg(long, default_value_t = 52.0)]
    periods_per_year: f64,
}

#[derive(Args)]
struct RegimesArgs {
    #[arg(long)]
    input: PathBuf,
    /// Regime report CSV.
    #[arg(long)]
    output: PathBuf,
    /// Averaged IR curve CSV; defaults to `<output stem>_average.csv`.
    #[arg(long)]
    average_output: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[command(flatten)]
    range: Range,
    #[arg(long, default_value_t = 70)]
    min_weeks: usize,
    #[arg(long, default_value_t = 20)]
    threshold_n: usize,
    /// Minimum segment length of the monthly segmentation.
    #[arg(long, default_value_t = 12)]
    min_segment_months: usize,
    /// Upper bound on the number of breaks; unbounded by default.
    #[arg(long)]
    max_breaks: Option<usize>,
    #[arg(long, default_value_t = 52.0)]
    periods_per_year: f64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Process spec JSON.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 400)]
    n_max: usize,
    #[arg(long, default_value_t = 500)]
    paths: usize,
    #[arg(long, default_value_t = 6068)]
    length: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Stationary,
    Squarewave,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Iid,
    Ma,
}

#[derive(Args)]
struct FitArgs {
    /// IR curve CSV with columns `n` and `ir` (or `ir_mean`).
    #[arg(long)]
    input: PathBuf,
    /// FitResult JSON.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, default_value_t = 10)]
    k_lags: usize,
    /// Standard deviation of the normalized returns, held fixed.
    #[arg(long, default_value_t = 1.5)]
    fixed_sd: f64,
    /// Drift of the square-wave model.
    #[arg(long, default_value_t = 0.075)]
    mu: f64,
    #[arg(long, value_enum, default_value = "iid")]
    noise: Noise,
    /// Lags whose noise autocorrelation is fitted.
    #[arg(long, value_delimiter = ',', default_value = "1,20")]
    ma_lags: Vec<usize>,
    #[arg(long, default_value_t = 21)]
    ma_horizon: usize,
    #[arg(long, default_value_t = 100)]
    t_min: usize,
    #[arg(long, default_value_t = 260)]
    t_max: usize,
    #[arg(long, default_value_t = 5)]
    t_step: usize,
    #[arg(long, default_value_t = 0.1)]
    start_amplitude: f64,
    #[arg(long, default_value_t = 500)]
    paths: usize,
    #[arg(long, default_value_t = 6068)]
    length: usize,
    #[arg(long, default_value_t = 20_000)]
    max_evaluations: usize,
    /// Required for the square-wave model.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Profile JSON `{"mu": .., "variance": .., "autocorr": [..]}`; overrides the
    /// individual flags.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho: Vec<f64>,
    #[command(flatten)]
    range: Range,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOMIR_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Ir(a) => ir(a),
        Command::Regimes(a) => regimes(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Theory(a) => theory(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let prices = read_prices(&a.input, a.frequency)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let weekly = match a.frequency {
        Period::Daily => timeseries::resample_to_weekly(&prices)?,
        Period::Weekly => prices.clone(),
        Period::Monthly => bail!("monthly prices cannot be converted to weekly returns"),
    };
    let returns = timeseries::log_returns(&weekly);
    write_series(&a.output, returns.dates(), returns.values())
        .with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "read {} prices, {} weekly prices, wrote {} returns",
        prices.len(),
        weekly.len(),
        returns.len()
    );
    Ok(())
}

fn ir(a: IrArgs) -> Result<()> {
    let lookbacks = a.range.lookbacks()?;
    let returns = read_returns(&a.input, Period::Weekly)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let x = timeseries::normalize(&returns, a.p)?;
    let curve = strategy::ir_curve(x.values(), lookbacks, a.periods_per_year)
        .context("not enough normalized returns for the requested lookbacks")?;
    let undefined = curve.entries.iter().filter(|e| e.ir.is_none()).count();
    if undefined > 0 {
        log::warn!("IR undefined (zero payoff variance) at {undefined} lookbacks");
    }
    write(&a.output, &curve.to_csv())?;
    if let Some(best) = curve.argmax() {
        println!(
            "{} normalized returns; max annualized IR {} at N = {}",
            x.len(),
            best.ir_annualized
                .map_or("NA".to_string(), |v| format!("{v:.4}")),
            best.n
        );
    }
    Ok(())
}

fn default_average_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}_average.csv"))
}

fn regimes(a: RegimesArgs) -> Result<()> {
    let config = RegimeConfig {
        normalization_window: a.p,
        min_segment_months: a.min_segment_months,
        max_breaks: a.max_breaks,
        min_weeks: a.min_weeks,
        lookbacks: a.range.lookbacks()?,
        threshold_n: a.threshold_n,
        periods_per_year: a.periods_per_year,
    };
    let returns = read_returns(&a.input, Period::Weekly)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let report = regimes::analyze_regimes(&returns, &config)?;
    let report_csv = report.to_csv();
    let average_csv = report.average.to_csv();
    let average_path = a
        .average_output
        .unwrap_or_else(|| default_average_path(&a.output));
    write(&a.output, &report_csv)?;
    write(&average_path, &average_csv)?;
    let case1 = report
        .stats
        .iter()
        .filter(|s| s.classification == regimes::Classification::CaseI)
        .count();
    println!(
        "{} breaks, {} regimes of at least {} weeks ({} case I, {} case II)",
        report.monthly.breakpoints.len(),
        report.stats.len(),
        a.min_weeks,
        case1,
        report.stats.len() - case1
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    ensure!(a.n_min >= 1 && a.n_max >= a.n_min, "invalid lookback range");
    let text = std::fs::read_to_string(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let spec: ProcessSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    info!("simulating {} paths of length {}", a.paths, a.length);
    let curve = simulate::mc_ir_curve(&spec, a.n_min..=a.n_max, a.paths, a.length, a.seed)?;
    let meta = serde_json::json!({
        "spec": spec,
        "paths": a.paths,
        "length": a.length,
        "seed": a.seed,
        "rng": simulate::RNG_ALGORITHM,
    });
    write(&a.output, &curve.to_csv())?;
    let mut meta_name = a.output.file_name().unwrap_or_default().to_os_string();
    meta_name.push(".meta.json");
    write(
        &a.output.with_file_name(meta_name),
        &(serde_json::to_string_pretty(&meta)? + "\n"),
    )?;
    println!(
        "wrote {} lookbacks from {} paths",
        curve.entries.len(),
        a.paths
    );
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let points =
        read_ir_points(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let result = match a.model {
        Model::Stationary => fit::fit_moment_profile(&points, a.k_lags, a.fixed_sd)?,
        Model::Squarewave => {
            let Some(seed) = a.seed else {
                bail!("--seed is required for the square-wave model");
            };
            ensure!(
                a.t_step >= 1 && a.t_max >= a.t_min,
                "invalid wave-period grid"
            );
            let noise = match a.noise {
                Noise::Iid => NoiseKind::Iid,
                Noise::Ma => NoiseKind::MaTargets {
                    lags: a.ma_lags.clone(),
                    horizon: a.ma_horizon,
                },
            };
            let options = SquareWaveOptions {
                wave_periods: (a.t_min..=a.t_max).step_by(a.t_step).collect(),
                start_amplitude: a.start_amplitude,
                paths: a.paths,
                length: a.length,
                seed,
                max_evaluations: a.max_evaluations,
                ..SquareWaveOptions::default()
            };
            fit::fit_square_wave(&points, a.mu, a.fixed_sd, noise, &options)?
        }
    };
    if !result.converged {
        log::warn!("optimizer stopped at the iteration cap; reporting the best point");
    }
    write(&a.output, &(serde_json::to_string_pretty(&result)? + "\n"))?;
    let summary: BTreeMap<&str, f64> = result
        .parameters
        .iter()
        .map(|(k, v)| (k.as_str(), *v))
        .collect();
    println!(
        "rss {:.6e}, converged {}, parameters {:?}",
        result.rss, result.converged, summary
    );
    Ok(())
}

fn theory(a: TheoryArgs) -> Result<()> {
    let profile = match &a.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<MomentProfile>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => MomentProfile::new(a.mu, a.variance, a.rho.clone())?,
    };
    let curve = theory::theory_curve(&profile, a.range.lookbacks()?)?;
    write(&a.output, &theory::theory_csv(&curve))?;
    println!("wrote {} lookbacks", curve.len());
    Ok(())
}
