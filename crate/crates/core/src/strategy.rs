//! Moving-average momentum strategy and empirical IR-versus-lookback curves.
//!
//! The position held over period `t` is the trailing mean `m_{t-1}(N)` of the
//! last `N` normalized returns; the payoff is `m_{t-1}(N) * X_t`. Position size
//! is the signal itself, so long and short branches share one formula.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};

/// Two-sided 95% normal critical value.
pub const Z95: f64 = 1.96;

// Rolling sums are recomputed from scratch this often to bound drift.
const RESYNC_EVERY: usize = 1024;

/// Trailing mean `m_t(N) = (1/N) * sum_{i=t-N+1..=t} x_i` (0-based `t`).
pub fn signal(x: &[f64], n: usize, t: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("lookback must be >= 1".into()));
    }
    if t >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "index {t} outside series of length {}",
            x.len()
        )));
    }
    if t + 1 < n {
        return Err(Error::TooShort {
            required: n,
            actual: t + 1,
        });
    }
    Ok(x[t + 1 - n..=t].iter().sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyPayoffs {
    pub lookback: usize,
    /// Index of the return paired with the first payoff.
    pub start: usize,
    pub payoffs: Vec<f64>,
}

impl StrategyPayoffs {
    pub fn mean(&self) -> f64 {
        self.payoffs.iter().sum::<f64>() / self.payoffs.len() as f64
    }
}

/// Calls `f(t, m_{t-1}(N))` for every `t` in `N..len`, in order.
fn for_each_signal(x: &[f64], n: usize, mut f: impl FnMut(usize, f64)) {
    let inv = 1.0 / n as f64;
    let mut window: f64 = x[..n].iter().sum();
    for t in n..x.len() {
        f(t, window * inv);
        let steps = t - n + 1;
        if steps.is_multiple_of(RESYNC_EVERY) {
            window = x[t + 1 - n..=t].iter().sum();
        } else {
            window += x[t] - x[t - n];
        }
    }
}

/// Runs the strategy with one rebalance per period and no costs.
/// Produces `len - N` payoffs.
pub fn backtest(x: &[f64], n: usize) -> Result<StrategyPayoffs> {
    check_lookback(x.len(), n)?;
    let mut payoffs = Vec::with_capacity(x.len() - n);
    for_each_signal(x, n, |t, m| payoffs.push(m * x[t]));
    Ok(StrategyPayoffs {
        lookback: n,
        start: n,
        payoffs,
    })
}

fn check_lookback(len: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("lookback must be >= 1".into()));
    }
    if len <= n {
        return Err(Error::TooShort {
            required: n + 1,
            actual: len,
        });
    }
    Ok(())
}

/// Mean and sample standard deviation of the payoffs for lookback `n`,
/// computed without materialising them.
pub fn payoff_moments(x: &[f64], n: usize) -> Result<(f64, f64, usize)> {
    check_lookback(x.len(), n)?;
    let count = x.len() - n;
    // Shifted accumulation: the first payoff serves as the pivot.
    let pivot = x[..n].iter().sum::<f64>() / n as f64 * x[n];
    let (mut s1, mut s2) = (0.0, 0.0);
    for_each_signal(x, n, |t, m| {
        let d = m * x[t] - pivot;
        s1 += d;
        s2 += d * d;
    });
    let c = count as f64;
    let mean = pivot + s1 / c;
    let var = if count > 1 {
        ((s2 - s1 * s1 / c) / (c - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, var.sqrt(), count))
}

/// `mean / sd`, or `None` when the standard deviation is zero (or negligible
/// next to the mean).
pub fn information_ratio(mean: f64, sd: f64) -> Option<f64> {
    if sd > 0.0 && sd > 1e-13 * mean.abs() {
        Some(mean / sd)
    } else {
        None
    }
}

/// Per-period IR for a single lookback.
pub fn ir_at(x: &[f64], n: usize) -> Result<Option<f64>> {
    let (mean, sd, _) = payoff_moments(x, n)?;
    Ok(information_ratio(mean, sd))
}

/// `ir * sqrt(periods_per_year)`.
pub fn annualize(ir_per_period: f64, periods_per_year: f64) -> f64 {
    ir_per_period * periods_per_year.sqrt()
}

/// 95% half-width of an annualized IR estimated from `samples` periods:
/// `1.96 * sqrt(periods_per_year) / sqrt(samples)`.
pub fn ir_standard_error(samples: usize, periods_per_year: f64) -> f64 {
    Z95 * periods_per_year.sqrt() / (samples as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrEntry {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// Per-period IR; `None` when the payoffs have zero variance.
    pub ir: Option<f64>,
    pub ir_annualized: Option<f64>,
    /// Annualized 95% half-width, see [`ir_standard_error`].
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrCurve {
    pub entries: Vec<IrEntry>,
    pub periods_per_year: f64,
}

impl IrCurve {
    pub fn get(&self, n: usize) -> Option<&IrEntry> {
        self.entries.iter().find(|e| e.n == n)
    }

    /// Defined `(n, ir)` pairs.
    pub fn points(&self) -> Vec<crate::fit::IrPoint> {
        self.entries
            .iter()
            .filter_map(|e| e.ir.map(|ir| crate::fit::IrPoint { n: e.n, ir }))
            .collect()
    }

    /// Entry with the largest defined IR. Ties resolve to the smallest `n`.
    pub fn argmax(&self) -> Option<&IrEntry> {
        self.entries
            .iter()
            .filter(|e| e.ir.is_some())
            .fold(None, |best: Option<&IrEntry>, e| match best {
                Some(b) if b.ir >= e.ir => Some(b),
                _ => Some(e),
            })
    }

    /// CSV with header `n,mean,sd,ir,ir_annualized,stderr,samples`.
    pub fn to_csv(&self) -> String {
        use crate::io::{fmt_g15, fmt_opt};
        let mut out = String::from("n,mean,sd,ir,ir_annualized,stderr,samples\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.n,
                fmt_g15(e.mean),
                fmt_g15(e.sd),
                fmt_opt(e.ir),
                fmt_opt(e.ir_annualized),
                fmt_g15(e.stderr),
                e.samples
            ));
        }
        out
    }
}

/// Empirical IR for every lookback in `lookbacks`.
pub fn ir_curve(
    x: &[f64],
    lookbacks: RangeInclusive<usize>,
    periods_per_year: f64,
) -> Result<IrCurve> {
    if lookbacks.is_empty() {
        return Err(Error::InvalidArgument("empty lookback range".into()));
    }
    if !(periods_per_year > 0.0) {
        return Err(Error::InvalidArgument(
            "periods per year must be positive".into(),
        ));
    }
    check_lookback(x.len(), *lookbacks.end())?;
    let entries = lookbacks
        .map(|n| {
            let (mean, sd, samples) = payoff_moments(x, n)?;
            let ir = information_ratio(mean, sd);
            Ok(IrEntry {
                n,
                mean,
                sd,
                ir,
                ir_annualized: ir.map(|v| annualize(v, periods_per_year)),
                stderr: ir_standard_error(samples, periods_per_year),
                samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IrCurve {
        entries,
        periods_per_year,
    })
}
