//! Closed-form expected return, variance and IR of the momentum strategy for a
//! stationary Gaussian return process.
//!
//! With `S = sum_{i=1..N} rho(i)` and `P = sum_{i != j} rho(|i - j|)` taken over
//! ordered pairs, the strategy moments are
//!
//! ```text
//! E[R]   = mu^2 + V S / N
//! Var[R] = ( N V^2 + N mu^2 V + N^2 V mu^2 + V^2 S^2 + V^2 P
//!          + mu^2 V (2 S + sum_{i != j} [rho(j) + rho(|i-j|) + rho(i)]) ) / N^2
//! ```
//!
//! The last sum equals `2 (N - 1) S + P`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PSD_TOLERANCE: f64 = 1e-10;

/// Drift, variance and autocorrelations of a stationary process. Lags beyond
/// the stored horizon have zero autocorrelation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct MomentProfile {
    mu: f64,
    variance: f64,
    autocorr: Vec<f64>,
}

#[derive(Deserialize)]
struct RawProfile {
    mu: f64,
    variance: f64,
    #[serde(default)]
    autocorr: Vec<f64>,
}

impl TryFrom<RawProfile> for MomentProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        MomentProfile::new(raw.mu, raw.variance, raw.autocorr)
    }
}

impl MomentProfile {
    pub fn new(mu: f64, variance: f64, autocorr: Vec<f64>) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidArgument("drift must be finite".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "variance must be positive, got {variance}"
            )));
        }
        if let Some((lag, rho)) = autocorr.iter().enumerate().find(|(_, r)| !(r.abs() <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "autocorrelation {rho} at lag {} outside [-1, 1]",
                lag + 1
            )));
        }
        check_psd(&autocorr)?;
        Ok(Self {
            mu,
            variance,
            autocorr,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn autocorr(&self) -> &[f64] {
        &self.autocorr
    }

    /// `rho(0) = 1`, stored values for `1..=K`, zero beyond.
    pub fn rho(&self, lag: usize) -> f64 {
        match lag {
            0 => 1.0,
            k => self.autocorr.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// `S = sum_{i=1..N} rho(i)`.
    fn rho_sum(&self, n: usize) -> f64 {
        self.autocorr.iter().take(n).sum()
    }

    /// `P = sum_{i != j} rho(|i - j|)` over ordered pairs `i, j in 1..=N`.
    fn rho_pair_sum(&self, n: usize) -> f64 {
        let max_lag = n.saturating_sub(1).min(self.autocorr.len());
        2.0 * (1..=max_lag)
            .map(|d| (n - d) as f64 * self.autocorr[d - 1])
            .sum::<f64>()
    }
}

/// Attempts an LDL^T factorization of the `(K+1) x (K+1)` Toeplitz correlation
/// matrix. Pivots within `PSD_TOLERANCE` of zero are accepted as semi-definite.
fn check_psd(autocorr: &[f64]) -> Result<()> {
    let dim = autocorr.len() + 1;
    let entry = |i: usize, j: usize| -> f64 {
        let lag = i.abs_diff(j);
        if lag == 0 {
            1.0
        } else {
            autocorr[lag - 1]
        }
    };
    let mut l = vec![0.0; dim * dim];
    let mut d = vec![0.0; dim];
    for j in 0..dim {
        let mut pivot = entry(j, j);
        for k in 0..j {
            pivot -= l[j * dim + k] * l[j * dim + k] * d[k];
        }
        if pivot < -PSD_TOLERANCE {
            return Err(Error::NotPositiveSemiDefinite { lag: j, pivot });
        }
        d[j] = pivot;
        l[j * dim + j] = 1.0;
        for i in j + 1..dim {
            if pivot <= PSD_TOLERANCE {
                // Singular direction: the remaining column must vanish.
                let mut v = entry(i, j);
                for k in 0..j {
                    v -= l[i * dim + k] * l[j * dim + k] * d[k];
                }
                if v.abs() > PSD_TOLERANCE.sqrt() {
                    return Err(Error::NotPositiveSemiDefinite { lag: j, pivot });
                }
                l[i * dim + j] = 0.0;
                continue;
            }
            let mut v = entry(i, j);
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k] * d[k];
            }
            l[i * dim + j] = v / pivot;
        }
    }
    Ok(())
}

/// Theoretical strategy statistics at one lookback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalIr {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub ir: f64,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("lookback must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `mu^2 + (V / N) * sum_{i=1..N} rho(i)`.
pub fn expected_return(profile: &MomentProfile, n: usize) -> Result<f64> {
    check_n(n)?;
    let mu2 = profile.mu * profile.mu;
    Ok(mu2 + profile.variance / n as f64 * profile.rho_sum(n))
}

/// Strategy payoff variance under the multivariate Gaussian assumption.
pub fn strategy_variance(profile: &MomentProfile, n: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    let v = profile.variance;
    let mu2 = profile.mu * profile.mu;
    let s = profile.rho_sum(n);
    let p = profile.rho_pair_sum(n);
    let mixed = 2.0 * (nf - 1.0) * s + p;
    let bracket = nf * v * v
        + nf * mu2 * v
        + nf * nf * v * mu2
        + v * v * s * s
        + v * v * p
        + mu2 * v * (2.0 * s + mixed);
    Ok(bracket / (nf * nf))
}

pub fn theoretical_ir(profile: &MomentProfile, n: usize) -> Result<TheoreticalIr> {
    let mean = expected_return(profile, n)?;
    let variance = strategy_variance(profile, n)?;
    if !(variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(TheoreticalIr {
        n,
        mean,
        variance,
        ir: mean / variance.sqrt(),
    })
}

/// Theoretical IR for every lookback in `lookbacks`.
pub fn theory_curve(
    profile: &MomentProfile,
    lookbacks: RangeInclusive<usize>,
) -> Result<Vec<TheoreticalIr>> {
    lookbacks.map(|n| theoretical_ir(profile, n)).collect()
}

/// CSV with header `n,mean,variance,ir`.
pub fn theory_csv(curve: &[TheoreticalIr]) -> String {
    use crate::io::fmt_g15;
    let mut out = String::from("n,mean,variance,ir\n");
    for t in curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.n,
            fmt_g15(t.mean),
            fmt_g15(t.variance),
            fmt_g15(t.ir)
        ));
    }
    out
}

/// IR with all autocorrelations zero:
/// `mu^2 / sqrt(V mu^2 + V^2 / N + mu^2 V / N)`.
pub fn ir_case1(mu: f64, variance: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument("variance must be positive".into()));
    }
    let nf = n as f64;
    let mu2 = mu * mu;
    Ok(mu2 / (variance * mu2 + variance * variance / nf + mu2 * variance / nf).sqrt())
}

/// IR with zero drift: `S / sqrt(N + S^2 + P)`. Independent of the variance.
pub fn ir_case2(autocorr: &[f64], n: usize) -> Result<f64> {
    check_n(n)?;
    let s: f64 = autocorr.iter().take(n).sum();
    let max_lag = n.saturating_sub(1).min(autocorr.len());
    let p = 2.0
        * (1..=max_lag)
            .map(|d| (n - d) as f64 * autocorr[d - 1])
            .sum::<f64>();
    Ok(s / (n as f64 + s * s + p).sqrt())
}
