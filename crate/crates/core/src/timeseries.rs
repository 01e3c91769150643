//! Price ingestion, log returns, calendar resampling and volatility normalization.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling frequency of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Daily,
    Weekly,
    Monthly,
}

impl Period {
    /// Conventional number of periods per year, used for annualization.
    pub fn periods_per_year(self) -> f64 {
        match self {
            Period::Daily => 252.0,
            Period::Weekly => 52.0,
            Period::Monthly => 12.0,
        }
    }
}

impl std::str::FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "daily" => Ok(Period::Daily),
            "weekly" => Ok(Period::Weekly),
            "monthly" => Ok(Period::Monthly),
            other => Err(Error::InvalidArgument(format!("unknown period '{other}'"))),
        }
    }
}

fn check_dates(dates: &[NaiveDate]) -> Result<()> {
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::UnorderedDates {
                index: i + 1,
                date: w[1],
            });
        }
    }
    Ok(())
}

/// Positive prices on strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
    period: Period,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>, period: Period) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::InvalidArgument(format!(
                "{} dates but {} prices",
                dates.len(),
                prices.len()
            )));
        }
        if prices.len() < 2 {
            return Err(Error::TooShort {
                required: 2,
                actual: prices.len(),
            });
        }
        for (index, (&price, &date)) in prices.iter().zip(&dates).enumerate() {
            if !price.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if price <= 0.0 {
                return Err(Error::NonPositivePrice { index, date, price });
            }
        }
        check_dates(&dates)?;
        Ok(Self {
            dates,
            prices,
            period,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Log returns stamped with the date of the later price.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    period: Period,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>, period: Period) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        check_dates(&dates)?;
        Ok(Self {
            dates,
            values,
            period,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Running sum of log returns, i.e. the log price relative to the first
    /// observation (which is not itself part of the series).
    pub fn cumulative(&self) -> Vec<f64> {
        self.values
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }
}

/// Returns divided by their trailing mean absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    window: usize,
}

impl NormalizedReturnSeries {
    /// Wraps already-normalized values (e.g. model output that represents `X_t`
    /// directly). `window` is recorded as metadata only.
    pub fn from_parts(dates: Vec<NaiveDate>, values: Vec<f64>, window: usize) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        check_dates(&dates)?;
        Ok(Self {
            dates,
            values,
            window,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series over `range` (indices into this series).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
            window: self.window,
        }
    }
}

/// `r_i = ln(S_i / S_{i-1})`.
pub fn log_returns(prices: &PriceSeries) -> ReturnSeries {
    let values = prices
        .prices
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    ReturnSeries {
        dates: prices.dates[1..].to_vec(),
        values,
        period: prices.period,
    }
}

fn resample_by<K: PartialEq>(
    prices: &PriceSeries,
    period: Period,
    key: impl Fn(NaiveDate) -> K,
) -> Result<PriceSeries> {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, &date) in prices.dates.iter().enumerate() {
        let last_of_bucket = prices
            .dates
            .get(i + 1)
            .is_none_or(|&next| key(next) != key(date));
        if last_of_bucket {
            dates.push(date);
            values.push(prices.prices[i]);
        }
    }
    PriceSeries::new(dates, values, period)
}

/// One observation per ISO (Monday-start) week: the last available price of
/// the week. Weeks without observations are skipped.
pub fn resample_to_weekly(prices: &PriceSeries) -> Result<PriceSeries> {
    if prices.period != Period::Daily {
        return Err(Error::InvalidArgument(format!(
            "weekly resampling needs daily input, got {:?}",
            prices.period
        )));
    }
    resample_by(prices, Period::Weekly, |d| {
        let w = d.iso_week();
        (w.year(), w.week())
    })
}

/// One observation per calendar month: the last available price of the month.
pub fn resample_to_monthly(prices: &PriceSeries) -> Result<PriceSeries> {
    if prices.period == Period::Monthly {
        return Ok(prices.clone());
    }
    resample_by(prices, Period::Monthly, |d| (d.year(), d.month()))
}

/// Divides each return by the mean absolute return of the preceding `p`
/// periods. The first output corresponds to input index `p`.
pub fn normalize(returns: &ReturnSeries, p: usize) -> Result<NormalizedReturnSeries> {
    if p == 0 {
        return Err(Error::InvalidArgument(
            "normalization window must be >= 1".into(),
        ));
    }
    let r = &returns.values;
    if r.len() <= p {
        return Err(Error::TooShort {
            required: p + 1,
            actual: r.len(),
        });
    }
    let mut values = Vec::with_capacity(r.len() - p);
    for t in p..r.len() {
        // Summed directly so that X_t depends on exactly r[t-p..=t].
        let scale = r[t - p..t].iter().map(|x| x.abs()).sum::<f64>() / p as f64;
        if scale == 0.0 {
            return Err(Error::ZeroWindow {
                date: returns.dates[t],
            });
        }
        values.push(r[t] / scale);
    }
    Ok(NormalizedReturnSeries {
        dates: returns.dates[p..].to_vec(),
        values,
        window: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn daily(start: &str, n: usize) -> Vec<NaiveDate> {
        let start = d(start);
        (0..n)
            .map(|i| start + chrono::Duration::days(i as i64))
            .collect()
    }

    fn returns(values: Vec<f64>) -> ReturnSeries {
        let dates = daily("2020-01-01", values.len());
        ReturnSeries::new(dates, values, Period::Weekly).unwrap()
    }

    #[test]
    fn log_returns_of_constant_prices_are_zero() {
        let p = PriceSeries::new(daily("2020-01-01", 3), vec![100.0; 3], Period::Daily).unwrap();
        assert_eq!(log_returns(&p).values(), &[0.0, 0.0]);
    }

    #[test]
    fn log_returns_examples() {
        let p = PriceSeries::new(
            daily("2020-01-01", 2),
            vec![1.0, std::f64::consts::E],
            Period::Daily,
        )
        .unwrap();
        assert_relative_eq!(log_returns(&p).values()[0], 1.0, epsilon = 1e-15);

        let p = PriceSeries::new(
            daily("2020-01-01", 3),
            vec![100.0, 110.0, 99.0],
            Period::Daily,
        )
        .unwrap();
        let r = log_returns(&p);
        assert_relative_eq!(r.values()[0], 1.1f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(r.values()[1], 0.9f64.ln(), epsilon = 1e-15);
        assert_eq!(r.dates()[0], d("2020-01-02"));
    }

    #[test]
    fn non_positive_price_names_index() {
        let err = PriceSeries::new(daily("2020-01-01", 3), vec![1.0, 0.0, 2.0], Period::Daily)
            .unwrap_err();
        match err {
            Error::NonPositivePrice { index, date, .. } => {
                assert_eq!(index, 1);
                assert_eq!(date, d("2020-01-02"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unordered_dates_rejected() {
        let dates = vec![d("2020-01-02"), d("2020-01-01")];
        assert!(matches!(
            PriceSeries::new(dates, vec![1.0, 2.0], Period::Daily),
            Err(Error::UnorderedDates { index: 1, .. })
        ));
    }

    #[test]
    fn weekly_resample_takes_friday() {
        // 2024-01-01 is a Monday.
        let dates: Vec<_> = daily("2024-01-01", 12)
            .into_iter()
            .filter(|d| d.weekday().num_days_from_monday() < 5)
            .collect();
        assert_eq!(dates.len(), 10);
        let prices: Vec<f64> = (1..=10).map(f64::from).collect();
        let p = PriceSeries::new(dates, prices, Period::Daily).unwrap();
        let w = resample_to_weekly(&p).unwrap();
        assert_eq!(w.dates(), &[d("2024-01-05"), d("2024-01-12")]);
        assert_eq!(w.prices(), &[5.0, 10.0]);
        assert_eq!(w.period(), Period::Weekly);
    }

    #[test]
    fn weekly_resample_friday_holiday_uses_thursday() {
        let dates = vec![
            d("2024-01-01"),
            d("2024-01-02"),
            d("2024-01-03"),
            d("2024-01-04"),
            d("2024-01-08"),
            d("2024-01-12"),
        ];
        let p = PriceSeries::new(dates, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Period::Daily).unwrap();
        let w = resample_to_weekly(&p).unwrap();
        assert_eq!(w.dates(), &[d("2024-01-04"), d("2024-01-12")]);
        assert_eq!(w.prices(), &[4.0, 6.0]);
    }

    #[test]
    fn weekly_resample_counts_weeks_and_skips_gaps() {
        let p = PriceSeries::new(daily("2024-01-01", 21), vec![1.0; 21], Period::Daily).unwrap();
        assert_eq!(resample_to_weekly(&p).unwrap().len(), 3);

        let dates = vec![d("2024-01-01"), d("2024-01-02"), d("2024-02-01")];
        let p = PriceSeries::new(dates, vec![1.0; 3], Period::Daily).unwrap();
        assert_eq!(resample_to_weekly(&p).unwrap().len(), 2);
    }

    #[test]
    fn weekly_resample_rejects_non_daily() {
        let p = PriceSeries::new(daily("2024-01-01", 3), vec![1.0; 3], Period::Weekly).unwrap();
        assert!(resample_to_weekly(&p).is_err());
    }

    #[test]
    fn monthly_resample_last_of_month() {
        let dates = vec![
            d("2024-01-05"),
            d("2024-01-26"),
            d("2024-02-02"),
            d("2024-02-23"),
        ];
        let p = PriceSeries::new(dates, vec![1.0, 2.0, 3.0, 4.0], Period::Weekly).unwrap();
        let m = resample_to_monthly(&p).unwrap();
        assert_eq!(m.dates(), &[d("2024-01-26"), d("2024-02-23")]);
        assert_eq!(m.prices(), &[2.0, 4.0]);
    }

    #[test]
    fn normalize_constant_returns_is_one() {
        let x = normalize(&returns(vec![0.3; 20]), 7).unwrap();
        assert_eq!(x.len(), 13);
        assert!(x.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn normalize_hand_example() {
        let x = normalize(&returns(vec![1.0, -1.0, 2.0]), 2).unwrap();
        assert_eq!(x.values(), &[2.0]);
        assert_eq!(x.dates()[0], d("2020-01-03"));
    }

    #[test]
    fn normalize_zero_window_names_date() {
        let err = normalize(&returns(vec![0.0, 0.0, 1.0, 2.0]), 2).unwrap_err();
        assert!(matches!(err, Error::ZeroWindow { date } if date == d("2020-01-03")));
    }

    #[test]
    fn normalize_rejects_short_input() {
        assert!(matches!(
            normalize(&returns(vec![1.0, 2.0]), 2),
            Err(Error::TooShort { .. })
        ));
        assert!(normalize(&returns(vec![1.0, 2.0]), 0).is_err());
    }

    #[test]
    fn normalized_gaussian_has_unit_mean_abs() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let r: Vec<f64> = (0..5000)
            .map(|_| 0.02 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let x = normalize(&returns(r), 10).unwrap();
        let mean_abs = x.values().iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64;
        assert!((mean_abs - 1.0).abs() < 0.2, "{mean_abs}");
    }

    proptest! {
        #[test]
        fn normalize_is_scale_invariant(
            r in prop::collection::vec(-1.0f64..1.0, 12..40),
            k in 0.01f64..100.0,
            p in 1usize..8,
        ) {
            prop_assume!(r.iter().all(|v| v.abs() > 1e-6));
            let a = normalize(&returns(r.clone()), p).unwrap();
            let b = normalize(&returns(r.iter().map(|v| v * k).collect()), p).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn normalize_has_no_look_ahead(
            r in prop::collection::vec(0.01f64..1.0, 15..40),
            p in 1usize..6,
            cut in 0usize..8,
        ) {
            let full = normalize(&returns(r.clone()), p).unwrap();
            let keep = r.len() - cut;
            let truncated = normalize(&returns(r[..keep].to_vec()), p).unwrap();
            prop_assert_eq!(truncated.values(), &full.values()[..truncated.len()]);
        }

        #[test]
        fn log_returns_round_trip(prices in prop::collection::vec(0.01f64..1e4, 2..60)) {
            let series = PriceSeries::new(daily("2000-01-01", prices.len()), prices.clone(), Period::Daily).unwrap();
            let cum = log_returns(&series).cumulative();
            for (i, c) in cum.iter().enumerate() {
                let rebuilt = prices[0] * c.exp();
                prop_assert!((rebuilt - prices[i + 1]).abs() <= 1e-12 * prices[i + 1]);
            }
        }
    }
}
