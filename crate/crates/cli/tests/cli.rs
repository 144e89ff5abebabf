use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use afterpulse::estimation::{bound_afterpulsing, fit_tail, TailFitOptions};
use afterpulse::io::{write_histogram_csv, write_report, InputMetadata, ReportDocument};
use afterpulse::waiting::WaitingPmf;
use afterpulse::{AfterpulseModel, DeadTime, InterArrivalHistogram, SlotParams, SlotWidth};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_afterpulse");
const PLOT_HEADER: &str = "time_us,empirical_log_pmf,fitted_line,excess_bound";

fn afterpulse(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = afterpulse(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(&format!("{key}: "))).unwrap_or_else(|| panic!("{key} in {text}"));
    line[key.len() + 2..].split_whitespace().next().unwrap().parse().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn simulate(dir: &TempDir, name: &str, extra: &[&str]) -> String {
    let out = path(dir, name);
    let mut args = vec!["simulate", "--out", &out];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn default_simulation_recovers_configured_rate() {
    let dir = TempDir::new().unwrap();
    let tags = simulate(&dir, "d.ttg", &["--seed", "1"]);
    let report = path(&dir, "r.json");
    let text = ok(&["analyze", "--in", &tags, "--range-us", "200", "--tau-us", "0", "--weighted", "--report", &report]);
    // 15 kcps in 100 ns slots
    let mu = value(&text, "mu_hat_per_slot");
    assert!((mu / 0.0015 - 1.0).abs() < 0.02, "{mu}");
}

#[test]
fn zero_events_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = afterpulse(&["simulate", "--events", "0", "--out", &path(&dir, "x.ttg")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_model_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = afterpulse(&[
        "simulate",
        "--ap-model",
        "exponential",
        "--ap-p0",
        "1.5",
        "--ap-tau0-us",
        "1",
        "--out",
        &path(&dir, "x.ttg"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let flags =
        ["--seed", "9", "--events", "50000", "--ap-model", "exponential", "--ap-p0", "0.03", "--ap-tau0-us", "1.66"];
    let a = simulate(&dir, "a.ttg", &flags);
    let b = simulate(&dir, "b.ttg", &flags);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn null_model_bound_is_small() {
    let dir = TempDir::new().unwrap();
    let tags = simulate(&dir, "n.ttg", &["--seed", "4"]);
    let text = ok(&["analyze", "--in", &tags, "--report", &path(&dir, "r.json")]);
    assert!(value(&text, "pa_upper") < 0.01, "{text}");
}

#[test]
fn bound_covers_labelled_afterpulses() {
    let dir = TempDir::new().unwrap();
    let labels = path(&dir, "l.csv");
    let tags = simulate(
        &dir,
        "ap.ttg",
        &[
            "--seed",
            "5",
            "--ap-model",
            "exponential",
            "--ap-p0",
            "0.03",
            "--ap-tau0-us",
            "1.66",
            "--dead-us",
            "0.1",
            "--labels",
            &labels,
        ],
    );
    let text = ok(&["analyze", "--in", &tags, "--report", &path(&dir, "r.json")]);
    let causes: Vec<String> = std::fs::read_to_string(&labels)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().to_owned())
        .collect();
    let ap = causes[1..].iter().filter(|c| *c == "afterpulse" || *c == "coincident").count();
    let fraction = ap as f64 / (causes.len() - 1) as f64;
    assert!(value(&text, "pa_upper") >= fraction, "{text} vs {fraction}");
}

#[test]
fn analyze_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let tags = simulate(&dir, "d.ttg", &["--seed", "2", "--events", "200000"]);
    let (r1, r2) = (path(&dir, "1.json"), path(&dir, "2.json"));
    for r in [&r1, &r2] {
        ok(&["analyze", "--in", &tags, "--sweep-tau", "1:10:1", "--fit-exp", "--report", r]);
    }
    assert_eq!(std::fs::read(r1).unwrap(), std::fs::read(r2).unwrap());
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = afterpulse(&["analyze", "--in", &path(&dir, "absent.ttg"), "--report", &path(&dir, "r.json")]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.ttg"));
}

#[test]
fn fit_failure_has_its_own_exit_code() {
    let dir = TempDir::new().unwrap();
    let tags = simulate(&dir, "few.ttg", &["--events", "3"]);
    let out = afterpulse(&["analyze", "--in", &tags, "--report", &path(&dir, "r.json")]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn optimizer_reaches_three_microseconds() {
    let tau0 = (2.9 / (0.135f64 / 0.0098).ln()).to_string();
    let text = ok(&[
        "optimize-deadtime",
        "--ap-total",
        "0.135",
        "--at-dead-us",
        "0.1",
        "--ap-tau0-us",
        &tau0,
        "--target",
        "0.01",
    ]);
    let dead_us = value(&text, "dead_time_us");
    assert!((2.8..=3.2).contains(&dead_us), "{text}");
    assert!(value(&text, "achieved_total") <= 0.01);

    let text = ok(&["optimize-deadtime", "--ap-p0", "0.001", "--ap-tau0-us", "1", "--target", "0.5"]);
    assert_eq!(value(&text, "dead_time_us"), 0.0);
}

#[test]
fn unreachable_target_is_explained() {
    let out = afterpulse(&["optimize-deadtime", "--ap-p0", "0.03", "--ap-tau0-us", "1", "--target", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));
}

/// Writes a noise-free histogram of `model` and a report fitted to it.
fn analytic_inputs(dir: &TempDir, model: &AfterpulseModel) -> (PathBuf, PathBuf) {
    let w = SlotWidth::from_ns(100).unwrap();
    let params = SlotParams::total(0.002, w).unwrap();
    let pmf = WaitingPmf::compute(&params, model, DeadTime::NONE, 199).unwrap();
    let scale = 1e18;
    let mut counts = vec![0u64; 200];
    for (c, v) in counts[1..].iter_mut().zip(pmf.values()) {
        *c = (v * scale).round() as u64;
    }
    let in_range: u64 = counts.iter().sum();
    let total = scale as u64;
    let hist = InterArrivalHistogram::from_parts(w, counts, total, total - in_range).unwrap();
    let tail = fit_tail(&hist, [5_000_000, 20_000_000], TailFitOptions::default()).unwrap();
    let bounds = bound_afterpulsing(&tail).unwrap();
    let input = InputMetadata {
        file: None,
        slot_width_ps: w.ps(),
        range_max_ps: hist.range_max_ps(),
        tau_ps: 5_000_000,
        total_intervals: total,
        overflow_intervals: hist.overflow(),
        dead_slots: None,
    };
    let (h, r) = (dir.path().join("h.csv"), dir.path().join("r.json"));
    write_histogram_csv(&hist, &h).unwrap();
    write_report(&ReportDocument::new(input, tail, bounds), &r).unwrap();
    (h, r)
}

fn plot(hist: &Path, report: &Path, emit: &str) -> Vec<Vec<String>> {
    let text =
        ok(&["plot-data", "--report", report.to_str().unwrap(), "--hist", hist.to_str().unwrap(), "--emit", emit]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(PLOT_HEADER));
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn tail_fit_line_matches_geometric_data() {
    let dir = TempDir::new().unwrap();
    let (h, r) = analytic_inputs(&dir, &AfterpulseModel::Null);
    let rows = plot(&h, &r, "tail-fit");
    assert_eq!(rows.len(), 150);
    for row in &rows {
        let (emp, line): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!((emp - line).abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn excess_is_zero_without_afterpulsing() {
    let dir = TempDir::new().unwrap();
    let (h, r) = analytic_inputs(&dir, &AfterpulseModel::Null);
    let rows = plot(&h, &r, "excess");
    assert!(!rows.is_empty());
    for row in &rows {
        assert!(row[3].parse::<f64>().unwrap().abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn plot_columns_are_stable() {
    let dir = TempDir::new().unwrap();
    let (h, r) = analytic_inputs(&dir, &AfterpulseModel::exponential(0.03, 1_660_000.0).unwrap());
    let first = plot(&h, &r, "waiting-pmf");
    // one row per waiting slot; bin 1 precedes slot 1
    assert_eq!(first.len(), 199);
    assert!(first.iter().all(|row| row.len() == 4));
    let times: Vec<f64> = first.iter().map(|row| row[0].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(plot(&h, &r, "waiting-pmf"), first);
}

#[test]
fn report_without_tail_fit_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (h, r) = analytic_inputs(&dir, &AfterpulseModel::Null);
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&r).unwrap()).unwrap();
    doc.as_object_mut().unwrap().remove("tail_fit");
    std::fs::write(&r, doc.to_string()).unwrap();
    let out =
        afterpulse(&["plot-data", "--report", r.to_str().unwrap(), "--hist", h.to_str().unwrap(), "--emit", "excess"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail_fit"));
}
