use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mosum_core::{simulate, DgpSpec, Layout, Panel};
use nalgebra::DMatrix;
use serde_json::Value;

fn mosum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mosum")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn write_panel(dir: &Path, name: &str, panel: &Panel) -> PathBuf {
    let path = dir.join(name);
    panel.save_csv(&path, Layout::SeriesInColumns).unwrap();
    path
}

fn null_panel(dir: &Path) -> PathBuf {
    let sim = simulate(&DgpSpec::m3(400, 100, 0.0, 0.0, 11)).unwrap();
    write_panel(dir, "m3.csv", &sim.panel)
}

fn break_panel(dir: &Path) -> PathBuf {
    let sim = simulate(&DgpSpec::m2(400, 100, 0.0, 0.0, 5)).unwrap();
    write_panel(dir, "m2.csv", &sim.panel)
}

#[test]
fn detect_on_null_panel_finds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = null_panel(dir.path());
    let out = mosum(&["detect", path.to_str().unwrap(), "--stable-reps", "5"]);
    let report = stdout_json(&out);
    assert_eq!(report["count"], 0);
    assert_eq!(report["estimates"].as_array().unwrap().len(), 0);
    assert_eq!(report["config"]["r_strategy"], "ic-stable");
}

#[test]
fn detect_writes_report_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let path = break_panel(dir.path());
    let out_dir = dir.path().join("out");
    let out = mosum(&["detect", path.to_str().unwrap(), "--r", "6", "--out-dir", out_dir.to_str().unwrap()]);
    let report = stdout_json(&out);
    let saved: Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
    assert!(report["count"].as_u64().unwrap() >= 1);

    let profile = std::fs::read_to_string(out_dir.join("profile.csv")).unwrap();
    let mut lines = profile.lines();
    assert_eq!(lines.next(), Some("k,stat,normalized_stat,threshold"));
    let gamma = report["gamma"].as_u64().unwrap() as usize;
    assert_eq!(lines.count(), 400 - 2 * gamma + 1);
}

#[test]
fn r_sweep_emits_normalized_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let path = break_panel(dir.path());
    let out_dir = dir.path().join("sweep");
    let out = mosum(&["detect", path.to_str().unwrap(), "--r-sweep", "1..3", "--out-dir", out_dir.to_str().unwrap()]);
    let reports = stdout_json(&out);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for (i, report) in reports.iter().enumerate() {
        let r = i + 1;
        assert_eq!(report["config"]["r"], r);
        let csv = std::fs::read_to_string(out_dir.join(format!("profile_r{r}.csv"))).unwrap();
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let mut normalized = std::collections::HashMap::new();
        for rec in rdr.records() {
            let rec = rec.unwrap();
            let k: usize = rec[0].parse().unwrap();
            let stat: f64 = rec[1].parse().unwrap();
            let norm: f64 = rec[2].parse().unwrap();
            let thr: f64 = rec[3].parse().unwrap();
            assert!((norm - stat / thr).abs() <= 1e-12 * norm.abs().max(1.0));
            normalized.insert(k, norm);
        }
        for cp in report["estimates"].as_array().unwrap() {
            let k = cp["k"].as_u64().unwrap() as usize;
            assert!(normalized[&k] > 1.0, "estimate {k} at r={r} below the reference line");
        }
        assert!(out_dir.join(format!("report_r{r}.json")).exists());
    }
}

#[test]
fn r_sweep_needs_an_output_directory() {
    let out = mosum(&["detect", "whatever.csv", "--r-sweep", "1..3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_exits_with_validation_code() {
    let out = mosum(&["detect", "/definitely/not/here.csv", "--r", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "validation");
    assert!(err["error"]["message"].as_str().unwrap().contains("here.csv"));
}

#[test]
fn numerical_failure_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let zero = Panel::from_matrix(DMatrix::zeros(10, 60)).unwrap();
    let path = write_panel(dir.path(), "zero.csv", &zero);
    let out = mosum(&["detect", path.to_str().unwrap(), "--r", "1", "--gamma", "10", "--no-demean"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["error"]["kind"], "numerical");
}

#[test]
fn bad_flag_values_exit_with_code_one() {
    assert_eq!(mosum(&["detect", "x.csv", "--mode", "sideways"]).status.code(), Some(1));
    assert_eq!(mosum(&["detect", "x.csv", "--r-sweep", "3..1", "--out-dir", "o"]).status.code(), Some(1));
    assert_eq!(mosum(&["--help"]).status.code(), Some(0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = break_panel(dir.path());
    let args = ["detect", path.to_str().unwrap(), "--stable-reps", "3", "--seed", "4"];
    let a = mosum(&args);
    let b = mosum(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let sim = ["simulate", "M3", "--T", "120", "--N", "20", "--reps", "3", "--seed", "2", "--r", "1"];
    let a = mosum(&sim);
    let b = mosum(&[&sim[..], &["--threads", "2"]].concat());
    assert!(a.status.success(), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_prints_one_row_with_unit_mass() {
    let out = mosum(&["simulate", "M3", "--T", "200", "--N", "30", "--reps", "4", "--seed", "1", "--r", "2"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "model");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "M3");
    let mass: f64 = (7..12).map(|i| rows[0][i].parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_rejects_zero_reps_and_bad_designs() {
    let out = mosum(&["simulate", "M3", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["error"]["message"].as_str().unwrap().contains("reps"));
    assert_eq!(mosum(&["simulate", "M2", "--rho-f", "1.5", "--reps", "1"]).status.code(), Some(1));
    assert_eq!(mosum(&["simulate", "M1", "--T", "500", "--reps", "1"]).status.code(), Some(1));
    assert_eq!(mosum(&["simulate", "--paper-table", "5"]).status.code(), Some(1));
}

#[test]
fn spectrum_of_rank_two_panel() {
    let dir = tempfile::tempdir().unwrap();
    let (n, t) = (30, 120);
    let loadings = DMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0 + j as f64 * 0.3);
    let factors = DMatrix::from_fn(2, t, |j, s| ((s * (j + 2)) as f64 * 0.7).sin() + if j == 1 { 0.5 } else { 0.0 });
    let panel = Panel::from_matrix(&loadings * factors).unwrap().demean();
    let path = write_panel(dir.path(), "rank2.csv", &panel);

    let out = mosum(&["spectrum", path.to_str().unwrap(), "--r-max", "5", "--stable-reps", "3"]);
    let rep = stdout_json(&out);
    assert_eq!(rep["r_max"], 5);
    assert_eq!(rep["stable"]["r_hat"], 2);
    assert_eq!(rep["eigen_ratio"]["r_hat"], 2);
    for curve in rep["information_criteria"]["ic_curves"].as_object().unwrap().values() {
        assert_eq!(curve.as_array().unwrap().len(), 6);
    }
    let ev = rep["eigenvalues"].as_array().unwrap();
    assert!(ev[2].as_f64().unwrap() < 1e-10 * ev[0].as_f64().unwrap());

    let out = mosum(&["spectrum", path.to_str().unwrap(), "--r-max", "30"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn volatility_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("prices.csv");
    let mut text = String::from("date,series,high,low\n");
    for d in 1..=5 {
        for (s, base) in [("AAA", 10.0), ("BBB", 50.0)] {
            text.push_str(&format!("2021-03-0{d},{s},{},{}\n", base + d as f64, base));
        }
    }
    std::fs::write(&input, text).unwrap();
    let out_path = dir.path().join("vol.csv");
    let out = mosum(&["volatility", input.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let panel = mosum_core::load_panel(&out_path, Layout::SeriesInColumns, false).unwrap();
    assert_eq!((panel.n(), panel.t()), (2, 5));
    assert_eq!(panel.series_labels(), ["AAA", "BBB"]);
    assert_eq!(panel.time_labels()[0], "2021-03-01");
    assert!(panel.values().row(0).sum().abs() < 1e-9);

    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, "date,series,high,low\nd1,ZZZ,3,3\n").unwrap();
    let out = mosum(&["volatility", flat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr_json(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("ZZZ") && msg.contains("d1"), "{msg}");
}
