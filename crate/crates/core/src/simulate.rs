//! Synthetic return processes and Monte Carlo IR curves.
//!
//! Every path draws from its own ChaCha20 stream: the generator is seeded from
//! the user seed and path `k` uses stream number `k`, so results do not depend
//! on evaluation order or thread count.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::strategy;

/// Name of the random number generator, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64, stream = path index); normals via rand_distr 0.5 StandardNormal ziggurat";

/// A simulatable return process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// `mu + sigma * eta_t`.
    IidGaussian { mu: f64, sigma: f64 },
    /// `mu + sigma * sum_k a_k * eta_{t-k+1}`.
    MovingAverage {
        mu: f64,
        coefficients: Vec<f64>,
        sigma: f64,
    },
    /// `mu + amplitude * sgn(sin(2 pi t / wave_period)) + noise_t`, `t = 1..`.
    SquareWaveDrift {
        mu: f64,
        amplitude: f64,
        wave_period: f64,
        noise: Box<ProcessSpec>,
    },
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        match self {
            ProcessSpec::IidGaussian { mu, sigma } => {
                if !mu.is_finite() {
                    return bad("mu must be finite".into());
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("sigma must be positive, got {sigma}"));
                }
            }
            ProcessSpec::MovingAverage {
                mu,
                coefficients,
                sigma,
            } => {
                if !mu.is_finite() {
                    return bad("mu must be finite".into());
                }
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return bad(format!("sigma must be positive, got {sigma}"));
                }
                if coefficients.is_empty() {
                    return bad("moving-average coefficient list is empty".into());
                }
                if coefficients.iter().any(|a| !a.is_finite()) {
                    return bad("moving-average coefficients must be finite".into());
                }
                if coefficients.iter().all(|&a| a == 0.0) {
                    return bad("moving-average coefficients are all zero".into());
                }
            }
            ProcessSpec::SquareWaveDrift {
                mu,
                amplitude,
                wave_period,
                noise,
            } => {
                if !mu.is_finite() || !amplitude.is_finite() {
                    return bad("mu and amplitude must be finite".into());
                }
                if !(*wave_period >= 2.0 && wave_period.is_finite()) {
                    return bad(format!("wave period must be >= 2, got {wave_period}"));
                }
                if noise.mu() != 0.0 {
                    return bad("noise process must have zero mean".into());
                }
                noise.validate()?;
            }
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        match self {
            ProcessSpec::IidGaussian { mu, .. }
            | ProcessSpec::MovingAverage { mu, .. }
            | ProcessSpec::SquareWaveDrift { mu, .. } => *mu,
        }
    }
}

/// `sgn(sin(2 pi t / period))` with `sgn(0) = +1`, evaluated on the exact
/// phase `t mod period` rather than through `sin`.
pub fn square_wave(t: f64, period: f64) -> f64 {
    if 2.0 * t.rem_euclid(period) <= period {
        1.0
    } else {
        -1.0
    }
}

fn fill(spec: &ProcessSpec, out: &mut [f64], rng: &mut ChaCha20Rng) {
    match spec {
        ProcessSpec::IidGaussian { mu, sigma } => {
            for v in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = mu + sigma * z;
            }
        }
        ProcessSpec::MovingAverage {
            mu,
            coefficients,
            sigma,
        } => {
            let q = coefficients.len();
            let eta: Vec<f64> = (0..out.len() + q - 1)
                .map(|_| StandardNormal.sample(rng))
                .collect();
            // eta[t + q - 1] is the innovation of period t.
            for (t, v) in out.iter_mut().enumerate() {
                let now = t + q - 1;
                let s: f64 = coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * eta[now - k])
                    .sum();
                *v = mu + sigma * s;
            }
        }
        ProcessSpec::SquareWaveDrift {
            mu,
            amplitude,
            wave_period,
            noise,
        } => {
            fill(noise, out, rng);
            for (t, v) in out.iter_mut().enumerate() {
                let wave = amplitude * square_wave((t + 1) as f64, *wave_period);
                *v += mu + wave;
            }
        }
    }
}

/// Deterministic sample path of `length` periods for `seed`.
pub fn generate(spec: &ProcessSpec, length: usize, seed: u64) -> Result<Vec<f64>> {
    generate_path(spec, length, seed, 0)
}

/// Path `path` of the family seeded by `seed`.
pub fn generate_path(spec: &ProcessSpec, length: usize, seed: u64, path: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if length == 0 {
        return Err(Error::InvalidArgument("length must be >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let mut out = vec![0.0; length];
    fill(spec, &mut out, &mut rng);
    Ok(out)
}

/// Autocorrelation of the moving average with the given coefficients:
/// `sum_j a_j a_{j+k} / sum_j a_j^2`, zero from lag `q` on.
pub fn theoretical_acf_of_ma(coefficients: &[f64], lag: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let q = coefficients.len();
    if lag >= q {
        return 0.0;
    }
    let energy: f64 = coefficients.iter().map(|a| a * a).sum();
    let cross: f64 = (0..q - lag)
        .map(|j| coefficients[j] * coefficients[j + lag])
        .sum();
    cross / energy
}

fn spectral_floor(targets: &[f64]) -> (f64, f64) {
    // Spectral density 1 + 2 sum_k rho_k cos(k w) of an MA(q-1) with these
    // autocorrelations; it must be non-negative for a factorisation to exist.
    let grid = 8192 * targets.len().max(1);
    let mut worst = (f64::INFINITY, 0.0);
    for g in 0..=grid {
        let w = std::f64::consts::PI * g as f64 / grid as f64;
        let density = 1.0
            + 2.0
                * targets
                    .iter()
                    .enumerate()
                    .map(|(k, r)| r * ((k + 1) as f64 * w).cos())
                    .sum::<f64>();
        if density < worst.0 {
            worst = (density, w);
        }
    }
    worst
}

/// Finds moving-average coefficients `a_1..a_q` whose autocorrelation matches
/// `targets` (lag -> value) at the listed lags and is zero at the other lags
/// below `horizon`. Coefficients are scaled so that `sum a_k^2 = variance`,
/// i.e. the process variance with unit innovation scale.
pub fn ma_from_target_acf(
    targets: &BTreeMap<usize, f64>,
    horizon: usize,
    variance: f64,
) -> Result<Vec<f64>> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidArgument("variance must be positive".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    for (&lag, &rho) in targets {
        if lag == 0 || lag >= horizon {
            return Err(Error::InvalidArgument(format!(
                "target lag {lag} outside 1..{horizon}"
            )));
        }
        if !(rho.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target {rho} at lag {lag} outside [-1, 1]"
            )));
        }
    }
    if targets.values().all(|&r| r == 0.0) {
        return Ok(vec![variance.sqrt()]);
    }
    let mut wanted = vec![0.0; horizon - 1];
    for (&lag, &rho) in targets {
        wanted[lag - 1] = rho;
    }
    let (min_density, frequency) = spectral_floor(&wanted);
    if min_density < -1e-9 {
        return Err(Error::Infeasible {
            min_density,
            frequency,
        });
    }

    // a_1 is pinned to 1; the remaining coefficients are searched. A
    // first-order start (a_k ~ rho_{k-1}) is close for weak correlations.
    let objective = |free: &[f64]| -> f64 {
        let mut a = Vec::with_capacity(horizon);
        a.push(1.0);
        a.extend_from_slice(free);
        wanted
            .iter()
            .enumerate()
            .map(|(k, w)| (theoretical_acf_of_ma(&a, k + 1) - w).powi(2))
            .sum()
    };
    let start: Vec<f64> = wanted.clone();
    let step: Vec<f64> = wanted.iter().map(|w| 0.05 + w.abs() * 0.5).collect();
    let nm = NelderMead {
        max_iter: 20_000,
        ftol: 1e-14,
        fatol: 1e-26,
        xtol: 1e-13,
        initial_step: Some(step),
        max_restarts: 40,
    };
    let found = nm.minimize(objective, &start);
    let mut a = Vec::with_capacity(horizon);
    a.push(1.0);
    a.extend_from_slice(&found.x);
    let worst = wanted
        .iter()
        .enumerate()
        .map(|(k, w)| (theoretical_acf_of_ma(&a, k + 1) - w).abs())
        .fold(0.0, f64::max);
    if worst > 1e-6 {
        return Err(Error::NotConverged(format!(
            "moving-average fit misses target autocorrelation by {worst:.3e}"
        )));
    }
    let scale = (variance / a.iter().map(|v| v * v).sum::<f64>()).sqrt();
    Ok(a.into_iter().map(|v| v * scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEntry {
    pub n: usize,
    pub ir_mean: f64,
    /// Sample SD of the per-path IR divided by `sqrt(paths)`.
    pub mc_se: f64,
    /// Paths whose IR was defined at this lookback.
    pub defined_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McIrCurve {
    pub entries: Vec<McEntry>,
    pub paths: usize,
    pub length: usize,
    pub seed: u64,
    pub rng: &'static str,
}

impl McIrCurve {
    pub fn get(&self, n: usize) -> Option<&McEntry> {
        self.entries.iter().find(|e| e.n == n)
    }

    pub fn points(&self) -> Vec<crate::fit::IrPoint> {
        self.entries
            .iter()
            .map(|e| crate::fit::IrPoint {
                n: e.n,
                ir: e.ir_mean,
            })
            .collect()
    }

    /// CSV with header `n,ir_mean,ir_mc_se,paths,length,seed`.
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_g15;
        let mut out = String::from("n,ir_mean,ir_mc_se,paths,length,seed\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.n,
                fmt_g15(e.ir_mean),
                fmt_g15(e.mc_se),
                self.paths,
                self.length,
                self.seed
            ));
        }
        out
    }
}

/// Per-path per-period IR at each lookback; `NaN` marks an undefined IR.
pub fn path_irs(
    spec: &ProcessSpec,
    lookbacks: &[usize],
    length: usize,
    seed: u64,
    path: u64,
) -> Result<Vec<f64>> {
    let x = generate_path(spec, length, seed, path)?;
    lookbacks
        .iter()
        .map(|&n| Ok(strategy::ir_at(&x, n)?.unwrap_or(f64::NAN)))
        .collect()
}

/// Monte Carlo IR curve: the generated series is used directly as the
/// normalized return series, one IR curve per path, averaged per lookback.
pub fn mc_ir_curve(
    spec: &ProcessSpec,
    lookbacks: RangeInclusive<usize>,
    paths: usize,
    length: usize,
    seed: u64,
) -> Result<McIrCurve> {
    let grid: Vec<usize> = lookbacks.collect();
    mc_ir_curve_at(spec, &grid, paths, length, seed)
}

/// [`mc_ir_curve`] on an arbitrary set of lookbacks.
pub fn mc_ir_curve_at(
    spec: &ProcessSpec,
    lookbacks: &[usize],
    paths: usize,
    length: usize,
    seed: u64,
) -> Result<McIrCurve> {
    spec.validate()?;
    if paths == 0 {
        return Err(Error::InvalidArgument("paths must be >= 1".into()));
    }
    let max_n = lookbacks
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidArgument("empty lookback range".into()))?;
    if lookbacks.contains(&0) {
        return Err(Error::InvalidArgument("lookback must be >= 1".into()));
    }
    if length <= max_n + 1 {
        return Err(Error::TooShort {
            required: max_n + 2,
            actual: length,
        });
    }
    let per_path: Vec<Vec<f64>> = (0..paths as u64)
        .into_par_iter()
        .map(|k| path_irs(spec, lookbacks, length, seed, k))
        .collect::<Result<_>>()?;

    let entries = lookbacks
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let values: Vec<f64> = per_path
                .iter()
                .map(|p| p[j])
                .filter(|v| !v.is_nan())
                .collect();
            let (mean, se) = mean_and_se(&values);
            McEntry {
                n,
                ir_mean: mean,
                mc_se: se,
                defined_paths: values.len(),
            }
        })
        .collect();
    Ok(McIrCurve {
        entries,
        paths,
        length,
        seed,
        rng: RNG_ALGORITHM,
    })
}

/// Neumaier-compensated mean and standard error of the mean.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (m - 1.0)).sqrt() / m.sqrt())
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
