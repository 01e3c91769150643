//! Stationary-regime detection and per-regime diagnostics.
//!
//! Regimes are found by fitting a piecewise-linear trend to the cumulative log
//! index: an exact dynamic program places breakpoints to minimise the total
//! residual sum of squares for each number of breaks, and the Bayesian
//! information criterion picks the number of breaks. Segments are fitted
//! independently, so the trend may jump at a break.

use std::ops::{Range, RangeInclusive};

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::strategy::{ir_curve, ir_standard_error, IrCurve, Z95};
use crate::timeseries::{normalize, NormalizedReturnSeries, ReturnSeries};

/// Least-squares line over `start..end`, with `x` the absolute index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub slope: f64,
    pub intercept: f64,
    /// `rss / (len - 2)`, zero for segments of two points or fewer.
    pub residual_variance: f64,
    pub rss: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn fit(y: &[f64], range: Range<usize>) -> Self {
        let (start, end) = (range.start, range.end);
        let pts = &y[range];
        let n = pts.len() as f64;
        let mx = (start + end - 1) as f64 / 2.0;
        let my = pts.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (k, &v) in pts.iter().enumerate() {
            let dx = (start + k) as f64 - mx;
            sxx += dx * dx;
            sxy += dx * (v - my);
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = my - slope * mx;
        let rss: f64 = pts
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let e = v - (intercept + slope * (start + k) as f64);
                e * e
            })
            .sum();
        let residual_variance = if pts.len() > 2 { rss / (n - 2.0) } else { 0.0 };
        Segment {
            start,
            end,
            slope,
            intercept,
            residual_variance,
            rss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    /// Length of the segmented series.
    pub len: usize,
    /// Start index of every segment after the first, as detected.
    pub breakpoints: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl Segmentation {
    /// Fits a line on each of the given spans.
    pub fn from_spans(y: &[f64], spans: &[Range<usize>]) -> Self {
        let segments: Vec<Segment> = spans.iter().map(|r| Segment::fit(y, r.clone())).collect();
        Segmentation {
            len: y.len(),
            breakpoints: segments.iter().skip(1).map(|s| s.start).collect(),
            segments,
        }
    }

    pub fn total_rss(&self) -> f64 {
        self.segments.iter().map(|s| s.rss).sum()
    }
}

/// Running simple-regression moments with `x` the point index.
#[derive(Default, Clone, Copy)]
struct LineAccumulator {
    n: f64,
    mx: f64,
    my: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

impl LineAccumulator {
    #[inline]
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        let dx = x - self.mx;
        let dy = y - self.my;
        self.mx += dx / self.n;
        self.my += dy / self.n;
        self.sxx += dx * (x - self.mx);
        self.sxy += dx * (y - self.my);
        self.syy += dy * (y - self.my);
    }

    #[inline]
    fn rss(&self) -> f64 {
        if self.sxx > 0.0 {
            (self.syy - self.sxy * self.sxy / self.sxx).max(0.0)
        } else {
            self.syy.max(0.0)
        }
    }
}

/// Globally optimal segmentation with a fixed number of breaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub breaks: usize,
    pub rss: f64,
    pub breakpoints: Vec<usize>,
}

/// Minimum-RSS partitions for every feasible number of breaks `0..=max_breaks`.
/// Every segment holds at least `min_segment` points.
pub fn optimal_partitions(
    y: &[f64],
    min_segment: usize,
    max_breaks: usize,
) -> Result<Vec<Partition>> {
    let n = y.len();
    let h = min_segment.max(2);
    if n < 2 * h {
        return Err(Error::TooShort {
            required: 2 * h,
            actual: n,
        });
    }
    let max_breaks = max_breaks.min(n / h - 1);

    // best[j]: minimal RSS of y[..j] with the current number of segments.
    let mut best = vec![f64::INFINITY; n + 1];
    let mut acc = LineAccumulator::default();
    for (j, &v) in y.iter().enumerate() {
        acc.push(j as f64, v);
        if j + 1 >= h {
            best[j + 1] = acc.rss();
        }
    }
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(max_breaks);
    let mut partitions = vec![Partition {
        breaks: 0,
        rss: best[n],
        breakpoints: Vec::new(),
    }];

    #[allow(clippy::needless_range_loop)]
    for m in 1..=max_breaks {
        let mut next = vec![f64::INFINITY; n + 1];
        let mut arg = vec![usize::MAX; n + 1];
        for i in m * h..=n - h {
            let prefix = best[i];
            if !prefix.is_finite() {
                continue;
            }
            let mut acc = LineAccumulator::default();
            for j in i..n {
                acc.push(j as f64, y[j]);
                if j + 1 - i >= h {
                    let total = prefix + acc.rss();
                    if total < next[j + 1] {
                        next[j + 1] = total;
                        arg[j + 1] = i;
                    }
                }
            }
        }
        back.push(arg);
        best = next;

        let mut breakpoints = Vec::with_capacity(m);
        let mut end = n;
        for layer in (0..m).rev() {
            let start = back[layer][end];
            breakpoints.push(start);
            end = start;
        }
        breakpoints.reverse();
        partitions.push(Partition {
            breaks: m,
            rss: best[n],
            breakpoints,
        });
    }
    Ok(partitions)
}

/// `n ln(rss / n) + (3m + 2) ln(n)`: each segment carries an intercept and a
/// slope, each break a location. `rss_floor` keeps exact fits comparable.
pub fn bic(rss: f64, n: usize, breaks: usize, rss_floor: f64) -> f64 {
    let nf = n as f64;
    nf * (rss.max(rss_floor) / nf).ln() + (3 * breaks + 2) as f64 * nf.ln()
}

/// Piecewise-linear breakpoint detection with BIC model selection.
pub fn detect_breakpoints(
    y: &[f64],
    min_segment: usize,
    max_breaks: usize,
) -> Result<Segmentation> {
    if min_segment == 0 {
        return Err(Error::InvalidArgument(
            "minimum segment length must be >= 1".into(),
        ));
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let partitions = optimal_partitions(y, min_segment, max_breaks)?;
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let scale = y
        .iter()
        .map(|v| (v - mean).abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let rss_floor = n as f64 * (1e-6 * scale).powi(2);
    let chosen = partitions
        .iter()
        .min_by(|a, b| {
            bic(a.rss, n, a.breaks, rss_floor)
                .total_cmp(&bic(b.rss, n, b.breaks, rss_floor))
                .then(a.breaks.cmp(&b.breaks))
        })
        .expect("at least the zero-break model");
    let mut bounds = vec![0];
    bounds.extend(&chosen.breakpoints);
    bounds.push(n);
    let spans: Vec<Range<usize>> = bounds.windows(2).map(|w| w[0]..w[1]).collect();
    Ok(Segmentation::from_spans(y, &spans))
}

/// Drops segments shorter than `min_len`. Survivors keep their spans.
pub fn filter_regimes(seg: &Segmentation, min_len: usize) -> Segmentation {
    Segmentation {
        len: seg.len,
        breakpoints: seg.breakpoints.clone(),
        segments: seg
            .segments
            .iter()
            .filter(|s| s.len() >= min_len)
            .cloned()
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcfPoint {
    pub lag: usize,
    pub value: f64,
    /// `1.96 / sqrt(len)`.
    pub se95: f64,
}

/// Sample autocorrelation at lags `1..=max_lag`, each computed as the Pearson
/// correlation of `(x_t, x_{t+lag})` pairs. A lag whose leading or trailing
/// window is constant reports zero.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<AcfPoint>> {
    if max_lag == 0 {
        return Err(Error::InvalidArgument("max lag must be >= 1".into()));
    }
    if x.len() <= max_lag + 1 {
        return Err(Error::TooShort {
            required: max_lag + 2,
            actual: x.len(),
        });
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::ZeroVariance);
    }
    let se95 = Z95 / (x.len() as f64).sqrt();
    Ok((1..=max_lag)
        .map(|lag| {
            let a = &x[..x.len() - lag];
            let b = &x[lag..];
            let m = a.len() as f64;
            let ma = a.iter().sum::<f64>() / m;
            let mb = b.iter().sum::<f64>() / m;
            let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
            for (u, v) in a.iter().zip(b) {
                sab += (u - ma) * (v - mb);
                saa += (u - ma) * (u - ma);
                sbb += (v - mb) * (v - mb);
            }
            let value = if saa > 0.0 && sbb > 0.0 {
                (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            AcfPoint { lag, value, se95 }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// Drift-dominated: the best lookback is long.
    CaseI,
    /// Autocorrelation-dominated: the best lookback is short.
    CaseII,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::CaseI => "CaseI",
            Classification::CaseII => "CaseII",
        })
    }
}

/// `CaseI` iff the IR-maximising lookback exceeds `threshold_n`.
pub fn classify(max_ir_lookback: usize, threshold_n: usize) -> Classification {
    if max_ir_lookback > threshold_n {
        Classification::CaseI
    } else {
        Classification::CaseII
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeStats {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub weeks: usize,
    pub acf1: f64,
    pub acf_se: f64,
    pub max_ir_annualized: f64,
    pub max_ir_lookback: usize,
    pub ir_se: f64,
    pub classification: Classification,
}

/// IR curve and diagnostics for one regime of normalized returns.
pub fn regime_stats(
    x: &NormalizedReturnSeries,
    lookbacks: RangeInclusive<usize>,
    threshold_n: usize,
    periods_per_year: f64,
) -> Result<(RegimeStats, IrCurve)> {
    if x.len() <= *lookbacks.end() {
        return Err(Error::TooShort {
            required: lookbacks.end() + 1,
            actual: x.len(),
        });
    }
    let curve = ir_curve(x.values(), lookbacks, periods_per_year)?;
    let best = curve.argmax().ok_or(Error::ZeroVariance)?;
    let acf1 = acf(x.values(), 1)?[0];
    let stats = RegimeStats {
        start: x.dates()[0],
        end: *x.dates().last().expect("non-empty"),
        weeks: x.len(),
        acf1: acf1.value,
        acf_se: acf1.se95,
        max_ir_annualized: best.ir_annualized.expect("argmax has a defined IR"),
        max_ir_lookback: best.n,
        ir_se: ir_standard_error(x.len(), periods_per_year),
        classification: classify(best.n, threshold_n),
    };
    Ok((stats, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEntry {
    pub n: usize,
    /// Unweighted mean of per-period IR across regimes.
    pub ir: f64,
    pub ir_annualized: f64,
    /// Standard error of the mean (per period); zero for a single regime.
    pub se: f64,
    pub regimes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleIrCurve {
    pub entries: Vec<EnsembleEntry>,
    pub periods_per_year: f64,
}

impl EnsembleIrCurve {
    pub fn points(&self) -> Vec<crate::fit::IrPoint> {
        self.entries
            .iter()
            .map(|e| crate::fit::IrPoint { n: e.n, ir: e.ir })
            .collect()
    }

    /// CSV with header `n,ir,ir_annualized,se,regimes`.
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_g15;
        let mut out = String::from("n,ir,ir_annualized,se,regimes\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.n,
                fmt_g15(e.ir),
                fmt_g15(e.ir_annualized),
                fmt_g15(e.se),
                e.regimes
            ));
        }
        out
    }
}

/// Per-lookback unweighted average of IR across curves sharing one lookback
/// grid. Undefined entries are left out of that lookback's average.
pub fn average_ir_curve(curves: &[IrCurve]) -> Result<EnsembleIrCurve> {
    let first = curves.first().ok_or(Error::Empty)?;
    let grid: Vec<usize> = first.entries.iter().map(|e| e.n).collect();
    for c in curves {
        if c.entries.len() != grid.len() || c.entries.iter().zip(&grid).any(|(e, &n)| e.n != n) {
            return Err(Error::InvalidArgument(
                "IR curves cover different lookbacks".into(),
            ));
        }
    }
    let ppy = first.periods_per_year;
    let mut entries = Vec::with_capacity(grid.len());
    for (k, &n) in grid.iter().enumerate() {
        let values: Vec<f64> = curves.iter().filter_map(|c| c.entries[k].ir).collect();
        if values.is_empty() {
            continue;
        }
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let se = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt()
        } else {
            0.0
        };
        entries.push(EnsembleEntry {
            n,
            ir: mean,
            ir_annualized: crate::strategy::annualize(mean, ppy),
            se,
            regimes: values.len(),
        });
    }
    if entries.is_empty() {
        return Err(Error::ZeroVariance);
    }
    Ok(EnsembleIrCurve {
        entries,
        periods_per_year: ppy,
    })
}

/// Settings for the full regime pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeConfig {
    pub normalization_window: usize,
    /// Minimum segment length for detection, in months.
    pub min_segment_months: usize,
    /// `None` allows as many breaks as the minimum segment length permits.
    pub max_breaks: Option<usize>,
    pub min_weeks: usize,
    pub lookbacks: RangeInclusive<usize>,
    pub threshold_n: usize,
    pub periods_per_year: f64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self {
            normalization_window: 10,
            min_segment_months: 12,
            max_breaks: None,
            min_weeks: 70,
            lookbacks: 1..=43,
            threshold_n: 20,
            periods_per_year: 52.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    /// Segmentation of the month-end cumulative log index.
    pub monthly: Segmentation,
    /// The same regimes on the normalized weekly series, after filtering.
    pub weekly: Segmentation,
    pub stats: Vec<RegimeStats>,
    pub curves: Vec<IrCurve>,
    pub average: EnsembleIrCurve,
}

impl RegimeReport {
    /// CSV with header `start,end,weeks,acf1,acf_se,max_ir,ir_se,max_ir_n,classification`.
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_g15;
        let mut out =
            String::from("start,end,weeks,acf1,acf_se,max_ir,ir_se,max_ir_n,classification\n");
        for s in &self.stats {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.start.format("%Y-%m-%d"),
                s.end.format("%Y-%m-%d"),
                s.weeks,
                fmt_g15(s.acf1),
                fmt_g15(s.acf_se),
                fmt_g15(s.max_ir_annualized),
                fmt_g15(s.ir_se),
                s.max_ir_lookback,
                s.classification
            ));
        }
        out
    }
}

/// Full pipeline on weekly log returns: normalize, segment the month-end log
/// index, map regimes back to weeks by calendar month, drop short regimes and
/// compute per-regime statistics and the ensemble IR curve.
pub fn analyze_regimes(returns: &ReturnSeries, config: &RegimeConfig) -> Result<RegimeReport> {
    let x = normalize(returns, config.normalization_window)?;
    let p = config.normalization_window;
    let cumulative = returns.cumulative();
    let month = |d: NaiveDate| (d.year(), d.month());

    let mut month_ends = Vec::new();
    for (i, &d) in returns.dates().iter().enumerate() {
        let last = returns
            .dates()
            .get(i + 1)
            .is_none_or(|&next| month(next) != month(d));
        if last {
            month_ends.push(i);
        }
    }
    let monthly_y: Vec<f64> = month_ends.iter().map(|&i| cumulative[i]).collect();
    let max_breaks = config.max_breaks.unwrap_or(usize::MAX);
    let monthly = detect_breakpoints(&monthly_y, config.min_segment_months, max_breaks)?;

    // Weekly cumulative index aligned with the normalized series.
    let aligned: Vec<f64> = cumulative[p..].to_vec();
    let x_months: Vec<(i32, u32)> = x.dates().iter().map(|&d| month(d)).collect();
    let mut spans = Vec::new();
    for seg in &monthly.segments {
        let first = month(returns.dates()[month_ends[seg.start]]);
        let last = month(returns.dates()[month_ends[seg.end - 1]]);
        let lo = x_months.partition_point(|&m| m < first);
        let hi = x_months.partition_point(|&m| m <= last);
        if hi > lo {
            spans.push(lo..hi);
        }
    }
    let weekly_all = Segmentation::from_spans(&aligned, &spans);
    let weekly = filter_regimes(&weekly_all, config.min_weeks);
    log::info!(
        "{} monthly segments, {} regimes after dropping those under {} weeks",
        monthly.segments.len(),
        weekly.segments.len(),
        config.min_weeks
    );
    if weekly.segments.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no regime spans at least {} weeks",
            config.min_weeks
        )));
    }

    let mut stats = Vec::with_capacity(weekly.segments.len());
    let mut curves = Vec::with_capacity(weekly.segments.len());
    for seg in &weekly.segments {
        let (s, c) = regime_stats(
            &x.slice(seg.start..seg.end),
            config.lookbacks.clone(),
            config.threshold_n,
            config.periods_per_year,
        )?;
        stats.push(s);
        curves.push(c);
    }
    let average = average_ir_curve(&curves)?;
    Ok(RegimeReport {
        monthly,
        weekly,
        stats,
        curves,
        average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn brute_force(y: &[f64], h: usize, breaks: usize) -> f64 {
        let n = y.len();
        let rss = |a: usize, b: usize| Segment::fit(y, a..b).rss;
        match breaks {
            0 => rss(0, n),
            1 => (h..=n - h)
                .map(|b| rss(0, b) + rss(b, n))
                .fold(f64::INFINITY, f64::min),
            2 => {
                let mut best = f64::INFINITY;
                for b1 in h..=n - 2 * h {
                    for b2 in b1 + h..=n - h {
                        best = best.min(rss(0, b1) + rss(b1, b2) + rss(b2, n));
                    }
                }
                best
            }
            _ => unimplemented!(),
        }
    }

    #[test]
    fn noiseless_two_piece_recovered_exactly() {
        let y: Vec<f64> = (0..60)
            .map(|i| if i < 25 { i as f64 } else { 50.0 - i as f64 })
            .collect();
        let seg = detect_breakpoints(&y, 5, 4).unwrap();
        assert_eq!(seg.breakpoints.len(), 1);
        // The kink value (i = 25) lies on both lines.
        assert!(
            (25..=26).contains(&seg.breakpoints[0]),
            "{:?}",
            seg.breakpoints
        );
        for s in &seg.segments {
            assert!(s.residual_variance < 1e-20);
        }
    }

    #[test]
    fn discontinuous_two_piece_recovered_exactly() {
        let y: Vec<f64> = (0..60)
            .map(|i| if i < 30 { i as f64 } else { 100.0 - i as f64 })
            .collect();
        let seg = detect_breakpoints(&y, 5, 4).unwrap();
        assert_eq!(seg.breakpoints, vec![30]);
        assert_relative_eq!(seg.segments[0].slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(seg.segments[1].slope, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_line_has_no_breaks() {
        let y: Vec<f64> = (0..80).map(|i| 0.3 * i as f64 - 2.0).collect();
        assert!(detect_breakpoints(&y, 6, 5).unwrap().breakpoints.is_empty());

        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..200)
            .map(|i| 0.1 * i as f64 + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        assert!(detect_breakpoints(&y, 12, 6)
            .unwrap()
            .breakpoints
            .is_empty());
    }

    #[test]
    fn too_short_series_rejected() {
        assert!(matches!(
            detect_breakpoints(&[1.0; 9], 5, 2),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn segments_tile_series() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..150).map(|_| StandardNormal.sample(&mut rng)).collect();
        let seg = detect_breakpoints(&y, 8, 10).unwrap();
        assert_eq!(seg.segments[0].start, 0);
        assert_eq!(seg.segments.last().unwrap().end, 150);
        for w in seg.segments.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert!(seg
            .segments
            .iter()
            .all(|s| s.len() >= 8 && s.slope.is_finite()));
    }

    #[test]
    fn filter_drops_short_segments() {
        let y: Vec<f64> = (0..250).map(|i| (i as f64).sqrt()).collect();
        let seg = Segmentation::from_spans(&y, &[0..100, 100..150, 150..250]);
        let kept = filter_regimes(&seg, 70);
        assert_eq!(kept.segments.len(), 2);
        assert_eq!(kept.segments[1].start, 150);
        assert_eq!(filter_regimes(&kept, 70), kept);
        assert_eq!(filter_regimes(&seg, 50), seg);
    }

    #[test]
    fn acf_examples() {
        let alt: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let a = acf(&alt, 2).unwrap();
        assert_relative_eq!(a[0].value, -1.0, epsilon = 1e-15);
        assert_relative_eq!(a[1].value, 1.0, epsilon = 1e-15);

        let noise = vec![0.3; 117];
        assert!(matches!(acf(&noise, 1), Err(Error::ZeroVariance)));
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let noise: Vec<f64> = (0..117).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert_relative_eq!(acf(&noise, 1).unwrap()[0].se95, 0.18, epsilon = 0.005);
        assert!(acf(&noise[..3], 2).is_err());
    }

    #[test]
    fn acf_recovers_ar1_coefficient() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(21);
        let mut x = vec![0.0f64; 2000];
        for t in 1..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = 0.3 * x[t - 1] + e;
        }
        let a = acf(&x, 1).unwrap()[0];
        assert!((a.value - 0.3).abs() < 3.0 * a.se95, "{a:?}");
    }

    #[test]
    fn classification_threshold() {
        assert_eq!(classify(21, 20), Classification::CaseI);
        assert_eq!(classify(20, 20), Classification::CaseII);
        assert_eq!(classify(1, 20), Classification::CaseII);
    }

    #[test]
    fn average_examples() {
        let x: Vec<f64> = (0..80).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let c = ir_curve(&x, 1..=5, 52.0).unwrap();
        let avg = average_ir_curve(&[c.clone(), c.clone()]).unwrap();
        for (e, o) in avg.entries.iter().zip(&c.entries) {
            assert_eq!(e.ir, o.ir.unwrap());
            assert_eq!(e.se, 0.0);
        }

        let mut neg = c.clone();
        for e in &mut neg.entries {
            e.ir = e.ir.map(|v| -v);
        }
        let avg = average_ir_curve(&[c.clone(), neg]).unwrap();
        assert!(avg.entries.iter().all(|e| e.ir.abs() < 1e-15));

        assert!(matches!(average_ir_curve(&[]), Err(Error::Empty)));
        let short = ir_curve(&x, 1..=4, 52.0).unwrap();
        assert!(average_ir_curve(&[c, short]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn dp_matches_brute_force(seed in 0u64..10_000, n in 20usize..45, h in 3usize..7) {
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let parts = optimal_partitions(&y, h, 2).unwrap();
            for p in parts.iter().take(3) {
                let exact = brute_force(&y, h, p.breaks);
                prop_assert!((p.rss - exact).abs() <= 1e-9 * exact.max(1.0));
                let spans = {
                    let mut b = vec![0];
                    b.extend(&p.breakpoints);
                    b.push(n);
                    b
                };
                let direct: f64 = spans.windows(2).map(|w| Segment::fit(&y, w[0]..w[1]).rss).sum();
                prop_assert!((direct - p.rss).abs() <= 1e-9 * exact.max(1.0));
            }
        }

        #[test]
        fn more_breaks_never_increase_rss(seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..90).scan(0.0, |c, _| {
                *c += Distribution::<f64>::sample(&StandardNormal, &mut rng);
                Some(*c)
            }).collect();
            let parts = optimal_partitions(&y, 5, 8).unwrap();
            for w in parts.windows(2) {
                prop_assert!(w[1].rss <= w[0].rss * (1.0 + 1e-12) + 1e-12);
            }
        }

        #[test]
        fn classification_invariant_to_monotone_rescaling(
            irs in prop::collection::vec(-1.0f64..1.0, 5..40),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let mk = |f: &dyn Fn(f64) -> f64| IrCurve {
                entries: irs.iter().enumerate().map(|(k, &v)| crate::strategy::IrEntry {
                    n: k + 1, mean: 0.0, sd: 1.0, ir: Some(f(v)), ir_annualized: Some(f(v)),
                    stderr: 0.0, samples: 100,
                }).collect(),
                periods_per_year: 52.0,
            };
            let base = mk(&|v| v);
            let scaled = mk(&|v| a * v.powi(3) + b);
            let (x, y) = (base.argmax().unwrap().n, scaled.argmax().unwrap().n);
            prop_assert_eq!(classify(x, 20), classify(y, 20));
            prop_assert_eq!(x, y);
        }
    }
}
