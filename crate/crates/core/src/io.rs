//! CSV ingestion and plot-ready CSV emission.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::timeseries::{Period, PriceSeries, ReturnSeries};

/// Formats like C's `%.15g`: 15 significant digits, trailing zeros removed,
/// scientific notation for very small or very large magnitudes.
pub fn fmt_g15(x: f64) -> String {
    const DIGITS: i32 = 15;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NA".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (DIGITS - 1 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `fmt_g15` for optional values; absent values become `NA`.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_g15)
}

fn csv_err(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Csv {
        line,
        message: e.to_string(),
    }
}

fn read_date_value(path: &Path, value_col: &str) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Csv {
                line: 0,
                message: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers().map_err(|e| csv_err(&e))?.clone();
    let expected = ["date", value_col];
    if headers.len() != 2 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Csv {
            line: 1,
            message: format!(
                "expected header 'date,{value_col}', found '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Csv { line, message };
        let date: NaiveDate = record[0]
            .parse()
            .map_err(|e| bad(format!("invalid date '{}': {e}", &record[0])))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|e| bad(format!("invalid number '{}': {e}", &record[1])))?;
        dates.push(date);
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::Empty);
    }
    Ok((dates, values))
}

/// Reads a `date,price` file.
pub fn read_prices(path: &Path, period: Period) -> Result<PriceSeries> {
    let (dates, prices) = read_date_value(path, "price")?;
    PriceSeries::new(dates, prices, period)
}

/// Reads a `date,value` return file as written by [`write_series`].
pub fn read_returns(path: &Path, period: Period) -> Result<ReturnSeries> {
    let (dates, values) = read_date_value(path, "value")?;
    ReturnSeries::new(dates, values, period)
}

/// Renders a `date,value` table.
pub fn series_csv(dates: &[NaiveDate], values: &[f64]) -> String {
    let mut out = String::from("date,value\n");
    for (d, v) in dates.iter().zip(values) {
        out.push_str(&format!("{},{}\n", d.format("%Y-%m-%d"), fmt_g15(*v)));
    }
    out
}

/// Writes `contents` to a sibling temporary file and renames it into place,
/// so a failed run never leaves a truncated output.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

/// Writes a `date,value` file atomically.
pub fn write_series(path: &Path, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
    write_atomic(path, series_csv(dates, values).as_bytes())
}

/// Reads an IR curve CSV with an `n` column and an IR column named `ir` or
/// `ir_mean`. Rows whose IR is `NA` are skipped.
pub fn read_ir_points(path: &Path) -> Result<Vec<crate::fit::IrPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(&e))?;
    let headers = reader.headers().map_err(|e| csv_err(&e))?.clone();
    let n_col = headers.iter().position(|h| h == "n");
    let ir_col = headers
        .iter()
        .position(|h| h == "ir")
        .or_else(|| headers.iter().position(|h| h == "ir_mean"));
    let (Some(n_col), Some(ir_col)) = (n_col, ir_col) else {
        return Err(Error::Csv {
            line: 1,
            message: "expected columns 'n' and 'ir' (or 'ir_mean')".into(),
        });
    };
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Csv { line, message };
        if &record[ir_col] == "NA" {
            continue;
        }
        let n: usize = record[n_col]
            .parse()
            .map_err(|e| bad(format!("invalid lookback '{}': {e}", &record[n_col])))?;
        let ir: f64 = record[ir_col]
            .parse()
            .map_err(|e| bad(format!("invalid IR '{}': {e}", &record[ir_col])))?;
        points.push(crate::fit::IrPoint { n, ir });
    }
    if points.is_empty() {
        return Err(Error::Empty);
    }
    Ok(points)
}
