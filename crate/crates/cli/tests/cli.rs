use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use momir_core::io::write_series;
use momir_core::simulate::{self, ProcessSpec};
use momir_core::theory::{self, MomentProfile};
use momir_core::timeseries::{normalize, Period, ReturnSeries};

fn momir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momir"))
        .args(args)
        .env("MOMIR_LOG", "error")
        .output()
        .expect("run momir")
}

fn ok(args: &[&str]) -> String {
    let out = momir(args);
    assert!(
        out.status.success(),
        "momir {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str]) -> String {
    let out = momir(args);
    assert!(
        !out.status.success(),
        "momir {args:?} unexpectedly succeeded"
    );
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn assert_golden(actual: &Path, name: &str) {
    let got = fs::read_to_string(actual).unwrap();
    let path = golden(name);
    if std::env::var_os("MOMIR_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &got).unwrap();
    }
    let want = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(got, want, "output differs from {}", path.display());
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect()
}

/// Weekly Fridays starting 1990-01-05.
fn weekly_dates(count: usize) -> Vec<chrono::NaiveDate> {
    let start = chrono::NaiveDate::from_ymd_opt(1990, 1, 5).unwrap();
    (0..count)
        .map(|i| start + chrono::Duration::weeks(i as i64))
        .collect()
}

/// Weekly log returns alternating between rising and falling drift every
/// 260 weeks.
fn regime_returns(dir: &Path) -> PathBuf {
    let len = 1560;
    let noise = simulate::generate(
        &ProcessSpec::IidGaussian {
            mu: 0.0,
            sigma: 0.02,
        },
        len,
        31,
    )
    .unwrap();
    let values: Vec<f64> = noise
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if (i / 260) % 2 == 0 {
                0.006 + e
            } else {
                -0.004 + e
            }
        })
        .collect();
    let path = dir.join("returns.csv");
    write_series(&path, &weekly_dates(len), &values).unwrap();
    path
}

#[test]
fn ingest_two_prices() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    fs::write(&input, "date,price\n2020-01-06,100\n2020-01-13,110\n").unwrap();
    let output = dir.path().join("returns.csv");
    ok(&[
        "ingest",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--frequency",
        "weekly",
    ]);
    let rows = data_rows(&output);
    assert_eq!(rows.len(), 1);
    let value: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - (1.1f64).ln()).abs() < 1e-14);
    assert!(rows[0].starts_with("2020-01-13,"));
}

#[test]
fn ingest_daily_four_weeks() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    let mut text = String::from("date,price\n");
    let monday = chrono::NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    for week in 0..4 {
        for day in 0..5 {
            let d = monday + chrono::Duration::days(week * 7 + day);
            text.push_str(&format!("{},{}\n", d, 100 + week * 5 + day));
        }
    }
    fs::write(&input, text).unwrap();
    let output = dir.path().join("returns.csv");
    let stdout = ok(&["ingest", "--input", s(&input), "--output", s(&output)]);
    assert!(
        stdout.contains("20 prices, 4 weekly prices, wrote 3 returns"),
        "{stdout}"
    );
    let rows = data_rows(&output);
    assert_eq!(rows.len(), 3);
    // Friday closes 104, 109, 114, 119.
    let first: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - (109.0f64 / 104.0).ln()).abs() < 1e-14);
}

#[test]
fn ingest_rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    let output = dir.path().join("returns.csv");
    fs::write(&input, "date,price\n2020-01-06,100\n2020-01-07,-3\n").unwrap();
    let msg = err(&["ingest", "--input", s(&input), "--output", s(&output)]);
    assert!(msg.contains("2020-01-07"), "{msg}");
    fs::write(&input, "date,price\n2020-01-06,100\n2020-01-07,abc\n").unwrap();
    let msg = err(&["ingest", "--input", s(&input), "--output", s(&output)]);
    assert!(msg.contains("line 3"), "{msg}");
    assert!(!output.exists());
}

#[test]
fn ir_curve_rises_with_drift() {
    let dir = tempfile::tempdir().unwrap();
    let len = 4000;
    let values = simulate::generate(
        &ProcessSpec::IidGaussian {
            mu: 0.01,
            sigma: 0.02,
        },
        len,
        3,
    )
    .unwrap();
    let input = dir.path().join("returns.csv");
    write_series(&input, &weekly_dates(len), &values).unwrap();
    let output = dir.path().join("ir.csv");
    ok(&[
        "ir",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--n-max",
        "30",
    ]);
    let text = fs::read_to_string(&output).unwrap();
    assert!(text.starts_with("n,mean,sd,ir,ir_annualized,stderr,samples\n"));
    let ir: Vec<f64> = data_rows(&output)
        .iter()
        .map(|r| r.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ir.len(), 30);
    assert!(ir[29] > ir[0] + 0.1, "{ir:?}");
    assert!(ir[9] > ir[0] && ir[29] > ir[9]);
    // Same shape as the drift-only closed form, evaluated with the moments
    // of the normalized series.
    let series = ReturnSeries::new(weekly_dates(len), values, Period::Weekly).unwrap();
    let x = normalize(&series, 10).unwrap();
    let m = x.values().iter().sum::<f64>() / x.len() as f64;
    let v = x.values().iter().map(|a| (a - m).powi(2)).sum::<f64>() / x.len() as f64;
    for (n, got) in [(1, ir[0]), (10, ir[9]), (30, ir[29])] {
        let want = theory::ir_case1(m, v, n).unwrap();
        assert!((got - want).abs() < 0.05, "N={n}: {got} vs {want}");
    }
}

#[test]
fn ir_flags_undefined_values() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("returns.csv");
    let output = dir.path().join("ir.csv");
    write_series(&input, &weekly_dates(60), &[0.01; 60]).unwrap();
    ok(&[
        "ir",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--n-max",
        "5",
    ]);
    for row in data_rows(&output) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3], "NA");
        assert_eq!(cols[4], "NA");
    }

    write_series(&input, &weekly_dates(60), &[0.0; 60]).unwrap();
    let msg = err(&[
        "ir",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--n-max",
        "5",
    ]);
    assert!(msg.contains("zero mean absolute return"), "{msg}");
}

#[test]
fn ir_rejects_long_lookback() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("returns.csv");
    let values = simulate::generate(
        &ProcessSpec::IidGaussian {
            mu: 0.0,
            sigma: 0.02,
        },
        50,
        1,
    )
    .unwrap();
    write_series(&input, &weekly_dates(50), &values).unwrap();
    let output = dir.path().join("ir.csv");
    let msg = err(&[
        "ir",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--n-max",
        "40",
    ]);
    assert!(msg.contains("need at least 41"), "{msg}");
    assert!(!output.exists());
}

#[test]
fn regimes_report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let input = regime_returns(dir.path());
    let report = dir.path().join("regimes.csv");
    let stdout = ok(&["regimes", "--input", s(&input), "--output", s(&report)]);
    assert!(stdout.contains("regimes of at least 70 weeks"), "{stdout}");
    assert_golden(&report, "regimes.csv");
    assert_golden(
        &dir.path().join("regimes_average.csv"),
        "regimes_average.csv",
    );
    let header = fs::read_to_string(&report).unwrap();
    assert!(
        header.starts_with("start,end,weeks,acf1,acf_se,max_ir,ir_se,max_ir_n,classification\n")
    );
}

#[test]
fn regimes_rejects_short_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("returns.csv");
    let values = simulate::generate(
        &ProcessSpec::IidGaussian {
            mu: 0.0,
            sigma: 0.02,
        },
        60,
        1,
    )
    .unwrap();
    write_series(&input, &weekly_dates(60), &values).unwrap();
    let report = dir.path().join("regimes.csv");
    err(&["regimes", "--input", s(&input), "--output", s(&report)]);
    assert!(!report.exists());
}

fn wave_spec_file(dir: &Path) -> PathBuf {
    let path = dir.join("spec.json");
    fs::write(
        &path,
        r#"{"variant":"square_wave_drift","mu":0.075,"amplitude":0.15,"wave_period":180,
            "noise":{"variant":"iid_gaussian","mu":0.0,"sigma":1.5}}"#,
    )
    .unwrap();
    path
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = wave_spec_file(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--input".into(),
            s(&spec).into(),
            "--output".into(),
            s(out).into(),
            "--n-max".into(),
            "20".into(),
            "--paths".into(),
            "20".into(),
            "--length".into(),
            "600".into(),
            "--seed".into(),
            "7".into(),
        ]
    };
    let run = |out: &Path| {
        let v = args(out);
        ok(&v.iter().map(String::as_str).collect::<Vec<_>>());
    };
    run(&a);
    run(&b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_golden(&a, "simulate.csv");
    let meta = fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(meta["seed"], 7);
    assert!(meta["rng"].as_str().unwrap().contains("ChaCha20"));
    assert_eq!(meta["spec"]["variant"], "square_wave_drift");
}

#[test]
fn simulate_requires_seed_and_valid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = wave_spec_file(dir.path());
    let out = dir.path().join("mc.csv");
    err(&["simulate", "--input", s(&spec), "--output", s(&out)]);
    fs::write(&spec, r#"{"variant":"iid_gaussian","mu":0,"sigma":-1}"#).unwrap();
    let msg = err(&[
        "simulate",
        "--input",
        s(&spec),
        "--output",
        s(&out),
        "--seed",
        "1",
        "--paths",
        "2",
    ]);
    assert!(msg.contains("sigma"), "{msg}");
    fs::write(&spec, r#"{"variant":"iid_gaussian","mu":0,"sigma":1}"#).unwrap();
    let msg = err(&[
        "simulate",
        "--input",
        s(&spec),
        "--output",
        s(&out),
        "--seed",
        "1",
        "--length",
        "100",
    ]);
    assert!(msg.contains("too short"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn theory_then_stationary_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("theory.csv");
    ok(&[
        "theory",
        "--output",
        s(&curve),
        "--mu",
        "0.1",
        "--variance",
        "2.25",
        "--rho",
        "0.05",
        "--n-max",
        "43",
    ]);
    let expected = MomentProfile::new(0.1, 2.25, vec![0.05]).unwrap();
    let first = data_rows(&curve)[0].clone();
    let ir1: f64 = first.split(',').nth(3).unwrap().parse().unwrap();
    assert!((ir1 - theory::theoretical_ir(&expected, 1).unwrap().ir).abs() < 1e-14);

    let result = dir.path().join("fit.json");
    ok(&[
        "fit",
        "--input",
        s(&curve),
        "--output",
        s(&result),
        "--model",
        "stationary",
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    let params = &json["parameters"];
    assert!((params["mu"].as_f64().unwrap() - 0.1).abs() < 1e-4);
    assert!((params["rho_1"].as_f64().unwrap() - 0.05).abs() < 1e-4);
    for k in 2..=10 {
        assert!(params[format!("rho_{k}")].as_f64().unwrap().abs() < 1e-4);
    }
    assert_eq!(json["n_params"], 11);
    assert_eq!(json["n_points"], 43);
    assert!(json["warning"].is_string());
    assert_eq!(json["settings"]["model"], "stationary");
}

#[test]
fn theory_reads_profile_json() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.json");
    fs::write(&profile, r#"{"mu":0,"variance":1,"autocorr":[0.05,0.02]}"#).unwrap();
    let out = dir.path().join("theory.csv");
    ok(&[
        "theory",
        "--input",
        s(&profile),
        "--output",
        s(&out),
        "--n-max",
        "2",
    ]);
    let rows = data_rows(&out);
    let ir2: f64 = rows[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!((ir2 - theory::ir_case2(&[0.05, 0.02], 2).unwrap()).abs() < 1e-15);

    fs::write(&profile, r#"{"mu":0,"variance":1,"autocorr":[0.9,-0.9]}"#).unwrap();
    let msg = err(&["theory", "--input", s(&profile), "--output", s(&out)]);
    assert!(msg.contains("positive semi-definite"), "{msg}");
}

#[test]
fn square_wave_fit_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let spec = wave_spec_file(dir.path());
    let curve = dir.path().join("mc.csv");
    ok(&[
        "simulate",
        "--input",
        s(&spec),
        "--output",
        s(&curve),
        "--n-max",
        "120",
        "--paths",
        "40",
        "--length",
        "2000",
        "--seed",
        "11",
    ]);
    let result = dir.path().join("fit.json");
    let args = [
        "fit",
        "--input",
        s(&curve),
        "--output",
        s(&result),
        "--model",
        "squarewave",
        "--t-min",
        "170",
        "--t-max",
        "190",
        "--t-step",
        "10",
        "--paths",
        "10",
        "--length",
        "2000",
    ];
    let msg = err(&args);
    assert!(msg.contains("--seed"), "{msg}");
    let mut with_seed = args.to_vec();
    with_seed.extend(["--seed", "12"]);
    ok(&with_seed);
    let first = fs::read(&result).unwrap();
    ok(&with_seed);
    assert_eq!(first, fs::read(&result).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(json["settings"]["model"], "square_wave");
    assert!(json["parameters"]["amplitude"].as_f64().unwrap() >= 0.0);
    let t = json["parameters"]["wave_period"].as_f64().unwrap();
    assert!([170.0, 180.0, 190.0].contains(&t));
}

#[test]
fn failed_write_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing/theory.csv");
    err(&["theory", "--output", s(&out), "--mu", "0.1"]);
    assert!(!out.exists());
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}
