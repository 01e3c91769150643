//! Least-squares fits of model IR curves to an empirical IR curve.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{Minimum, NelderMead};
use crate::simulate::{self, ProcessSpec};
use crate::theory::{self, MomentProfile};

/// One point of an IR-versus-lookback curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrPoint {
    pub n: usize,
    pub ir: f64,
}

/// Data points per fitted parameter below which an over-fitting warning is raised.
pub const POINTS_PER_PARAMETER: usize = 5;

/// Objective value assigned to parameter vectors outside the admissible region.
const REJECTED: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitSettings {
    Stationary {
        k_lags: usize,
        fixed_sd: f64,
        start_mu: f64,
        max_iter: usize,
        ftol: f64,
    },
    SquareWave {
        mu: f64,
        sigma: f64,
        noise: NoiseKind,
        wave_periods: Vec<usize>,
        paths: usize,
        length: usize,
        seed: u64,
        max_evaluations: usize,
        rng: &'static str,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    pub rss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Model IR at each empirical lookback.
    pub fitted: Vec<IrPoint>,
    pub n_params: usize,
    pub n_points: usize,
    pub warning: Option<String>,
    pub settings: FitSettings,
    /// Best objective value after each optimizer iteration.
    #[serde(skip)]
    pub history: Vec<f64>,
}

fn sorted_points(points: &[IrPoint]) -> Result<Vec<IrPoint>> {
    if points.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.n);
    if let Some(w) = sorted.windows(2).find(|w| w[0].n == w[1].n) {
        return Err(Error::InvalidArgument(format!(
            "duplicate lookback {}",
            w[0].n
        )));
    }
    if sorted[0].n == 0 {
        return Err(Error::InvalidArgument("lookback must be >= 1".into()));
    }
    if let Some(p) = sorted.iter().find(|p| !p.ir.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite IR at lookback {}",
            p.n
        )));
    }
    Ok(sorted)
}

fn overfit_warning(n_params: usize, n_points: usize) -> Option<String> {
    if n_points < POINTS_PER_PARAMETER * n_params {
        let msg = format!(
            "{n_params} parameters fitted to {n_points} points; the fit is likely over-fitted"
        );
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    }
}

fn stationary_profile(params: &[f64], variance: f64) -> Result<MomentProfile> {
    MomentProfile::new(params[0], variance, params[1..].to_vec())
}

fn stationary_rss(points: &[IrPoint], profile: &MomentProfile) -> Result<f64> {
    let mut rss = 0.0;
    for p in points {
        let model = theory::theoretical_ir(profile, p.n)?.ir;
        rss += (model - p.ir) * (model - p.ir);
    }
    Ok(rss)
}

/// Fits drift and the first `k_lags` autocorrelations with the variance held
/// at `fixed_sd^2`. Starts from zero autocorrelation and the drift implied
/// by the long-lookback IR level; non-PSD autocorrelations are rejected by a
/// penalty. Only `|mu|` is identified and reported.
pub fn fit_moment_profile(points: &[IrPoint], k_lags: usize, fixed_sd: f64) -> Result<FitResult> {
    if !(fixed_sd > 0.0 && fixed_sd.is_finite()) {
        return Err(Error::InvalidArgument("fixed sd must be positive".into()));
    }
    let points = sorted_points(points)?;
    if points.len() < k_lags + 1 {
        return Err(Error::TooShort {
            required: k_lags + 1,
            actual: points.len(),
        });
    }
    let variance = fixed_sd * fixed_sd;
    let tail = points.last().expect("non-empty").ir;
    let start_mu = tail.abs() * fixed_sd;

    let objective = |params: &[f64]| -> f64 {
        match stationary_profile(params, variance) {
            Ok(profile) => stationary_rss(&points, &profile).unwrap_or(REJECTED),
            Err(_) => REJECTED + params[1..].iter().map(|r| r * r).sum::<f64>(),
        }
    };
    let mut start = vec![0.0; k_lags + 1];
    start[0] = start_mu;
    let mut step = vec![0.02; k_lags + 1];
    step[0] = 0.1 * start_mu.max(0.01);
    let nm = NelderMead {
        max_iter: 2000,
        ftol: 1e-8,
        fatol: 1e-30,
        xtol: 1e-12,
        initial_step: Some(step),
        max_restarts: 50,
    };
    let Minimum {
        x,
        value,
        iterations,
        evaluations,
        converged,
        history,
    } = nm.minimize(objective, &start);

    let profile = stationary_profile(&x, variance)?;
    let fitted = points
        .iter()
        .map(|p| {
            Ok(IrPoint {
                n: p.n,
                ir: theory::theoretical_ir(&profile, p.n)?.ir,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut parameters = BTreeMap::new();
    parameters.insert("mu".to_string(), x[0].abs());
    for (k, rho) in x[1..].iter().enumerate() {
        parameters.insert(format!("rho_{}", k + 1), *rho);
    }
    let n_params = k_lags + 1;
    Ok(FitResult {
        parameters,
        rss: value,
        iterations,
        evaluations,
        converged,
        fitted,
        n_params,
        n_points: points.len(),
        warning: overfit_warning(n_params, points.len()),
        settings: FitSettings::Stationary {
            k_lags,
            fixed_sd,
            start_mu,
            max_iter: nm.max_iter,
            ftol: nm.ftol,
        },
        history,
    })
}

/// Noise model of the square-wave fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Iid,
    /// Moving-average noise whose autocorrelations at `lags` are fitted;
    /// the other lags below `horizon` are zero.
    MaTargets {
        lags: Vec<usize>,
        horizon: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareWaveOptions {
    /// Candidate wave periods.
    pub wave_periods: Vec<usize>,
    pub start_amplitude: f64,
    pub paths: usize,
    pub length: usize,
    pub seed: u64,
    /// Cap on Monte Carlo curve evaluations across the whole grid.
    pub max_evaluations: usize,
    pub max_iter: usize,
}

impl Default for SquareWaveOptions {
    fn default() -> Self {
        Self {
            wave_periods: (100..=260).step_by(5).collect(),
            start_amplitude: 0.1,
            paths: 100,
            length: 6068,
            seed: 0,
            max_evaluations: 20_000,
            max_iter: 2000,
        }
    }
}

/// Process whose simulated IR curve is compared with the data.
/// `params` holds the amplitude followed by the noise autocorrelation targets.
pub fn square_wave_spec(
    mu: f64,
    sigma: f64,
    wave_period: usize,
    noise: &NoiseKind,
    params: &[f64],
) -> Result<ProcessSpec> {
    let noise = match noise {
        NoiseKind::Iid => ProcessSpec::IidGaussian { mu: 0.0, sigma },
        NoiseKind::MaTargets { lags, horizon } => {
            let targets: BTreeMap<usize, f64> = lags
                .iter()
                .copied()
                .zip(params[1..].iter().copied())
                .collect();
            ProcessSpec::MovingAverage {
                mu: 0.0,
                coefficients: simulate::ma_from_target_acf(&targets, *horizon, sigma * sigma)?,
                sigma: 1.0,
            }
        }
    };
    Ok(ProcessSpec::SquareWaveDrift {
        mu,
        amplitude: params[0].abs(),
        wave_period: wave_period as f64,
        noise: Box::new(noise),
    })
}

/// Squared mismatch between the Monte Carlo model curve and `points`.
/// Uses the same seed for every parameter vector, so it is a deterministic
/// function of the parameters.
pub fn square_wave_objective(
    points: &[IrPoint],
    spec: &ProcessSpec,
    paths: usize,
    length: usize,
    seed: u64,
) -> Result<(f64, Vec<IrPoint>)> {
    let lookbacks: Vec<usize> = points.iter().map(|p| p.n).collect();
    let curve = simulate::mc_ir_curve_at(spec, &lookbacks, paths, length, seed)?;
    let mut rss = 0.0;
    for (p, e) in points.iter().zip(&curve.entries) {
        rss += (e.ir_mean - p.ir) * (e.ir_mean - p.ir);
    }
    Ok((rss, curve.points()))
}

struct Cell {
    wave_period: usize,
    minimum: Minimum,
}

/// Grid search over the wave period crossed with a simplex search over the
/// amplitude (and the noise autocorrelation targets for moving-average noise).
pub fn fit_square_wave(
    points: &[IrPoint],
    mu: f64,
    sigma: f64,
    noise: NoiseKind,
    options: &SquareWaveOptions,
) -> Result<FitResult> {
    let points = sorted_points(points)?;
    if options.wave_periods.is_empty() {
        return Err(Error::InvalidArgument("empty wave-period grid".into()));
    }
    if let Some(t) = options.wave_periods.iter().find(|&&t| t < 2) {
        return Err(Error::InvalidArgument(format!("wave period {t} < 2")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(Error::InvalidArgument(
            "mu must be finite and sigma positive".into(),
        ));
    }
    if let NoiseKind::MaTargets { lags, horizon } = &noise {
        if lags.is_empty() || lags.iter().any(|&l| l == 0 || l >= *horizon) {
            return Err(Error::InvalidArgument(format!(
                "target lags must lie in 1..{horizon}"
            )));
        }
    }
    let max_n = points.last().expect("non-empty").n;
    if options.length <= max_n + 1 {
        return Err(Error::TooShort {
            required: max_n + 2,
            actual: options.length,
        });
    }

    let mut start = vec![options.start_amplitude];
    let mut step = vec![0.5 * options.start_amplitude.abs().max(0.02)];
    if let NoiseKind::MaTargets { lags, .. } = &noise {
        start.extend(std::iter::repeat_n(0.0, lags.len()));
        step.extend(std::iter::repeat_n(0.02, lags.len()));
    }
    let nm = NelderMead {
        max_iter: options.max_iter,
        ftol: 1e-4,
        fatol: 1e-30,
        xtol: 1e-4,
        initial_step: Some(step),
        max_restarts: 1,
    };

    let spent = AtomicUsize::new(0);
    let failure: std::sync::Mutex<Option<Error>> = std::sync::Mutex::new(None);
    let cells: Vec<Cell> = options
        .wave_periods
        .par_iter()
        .map(|&wave_period| {
            let objective = |params: &[f64]| -> f64 {
                if spent.fetch_add(1, Ordering::Relaxed) >= options.max_evaluations {
                    return f64::INFINITY;
                }
                let spec = match square_wave_spec(mu, sigma, wave_period, &noise, params) {
                    Ok(spec) => spec,
                    Err(
                        Error::Infeasible { .. }
                        | Error::NotConverged(_)
                        | Error::InvalidArgument(_),
                    ) => return REJECTED,
                    Err(e) => {
                        failure.lock().expect("poisoned").get_or_insert(e);
                        return f64::INFINITY;
                    }
                };
                match square_wave_objective(
                    &points,
                    &spec,
                    options.paths,
                    options.length,
                    options.seed,
                ) {
                    Ok((rss, _)) => rss,
                    Err(e) => {
                        failure.lock().expect("poisoned").get_or_insert(e);
                        f64::INFINITY
                    }
                }
            };
            Cell {
                wave_period,
                minimum: nm.minimize(objective, &start),
            }
        })
        .collect();

    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let used = spent.into_inner();
    if used > options.max_evaluations {
        return Err(Error::BudgetExhausted {
            evaluations: options.max_evaluations,
        });
    }

    // Ties go to the first grid entry.
    let best = cells
        .iter()
        .fold(None::<&Cell>, |acc, c| match acc {
            Some(b) if b.minimum.value <= c.minimum.value => Some(b),
            _ => Some(c),
        })
        .expect("non-empty grid");
    let spec = square_wave_spec(mu, sigma, best.wave_period, &noise, &best.minimum.x)?;
    let (rss, fitted) =
        square_wave_objective(&points, &spec, options.paths, options.length, options.seed)?;

    let mut parameters = BTreeMap::new();
    parameters.insert("wave_period".to_string(), best.wave_period as f64);
    parameters.insert("amplitude".to_string(), best.minimum.x[0].abs());
    if let NoiseKind::MaTargets { lags, .. } = &noise {
        for (lag, rho) in lags.iter().zip(&best.minimum.x[1..]) {
            parameters.insert(format!("rho_{lag}"), *rho);
        }
    }
    let n_params = 1 + best.minimum.x.len();
    Ok(FitResult {
        parameters,
        rss,
        iterations: cells.iter().map(|c| c.minimum.iterations).sum(),
        evaluations: used,
        converged: best.minimum.converged,
        fitted,
        n_params,
        n_points: points.len(),
        warning: overfit_warning(n_params, points.len()),
        settings: FitSettings::SquareWave {
            mu,
            sigma,
            noise,
            wave_periods: options.wave_periods.clone(),
            paths: options.paths,
            length: options.length,
            seed: options.seed,
            max_evaluations: options.max_evaluations,
            rng: simulate::RNG_ALGORITHM,
        },
        history: best.minimum.history.clone(),
    })
}
