use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn domain(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../domains").join(name)
}

fn capdual(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capdual"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CAPDUAL_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn dual_on_square_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sq = domain("square.json");
    let out = capdual(&["dual", "--domain", sq.to_str().unwrap(), "--p", "1.5", "--h", "0.04"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = json(&dir.path().join("report.json"));
    let product = report["body"]["product"].as_f64().unwrap();
    assert!((product - 1.0).abs() < 0.05);
    assert_eq!(report["body"]["converged"], Value::Bool(true));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "dual");
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["common"]["p"], 1.5);
    let hash = manifest["input_hashes"][sq.display().to_string()].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["versions"]["capdual"].is_string());
    let csv = fs::read_to_string(dir.path().join("duality.csv")).unwrap();
    assert!(csv.starts_with("h,extrapolated,cap_13,cap_24,product\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn missing_domain_file_exits_1_with_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = capdual(&["dual", "--domain", "no/such/file.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rec = error_record(&out);
    assert_eq!(rec["kind"], "Io");
    assert_eq!(rec["exit_code"], 1);
    assert_eq!(json(&dir.path().join("manifest.json"))["status"], "error");
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = capdual(&["metric", "--z1", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["kind"], "Usage");
    let sq = domain("square.json");
    let out = capdual(&["cap", "--domain", sq.to_str().unwrap(), "--p", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["kind"], "Precondition");
}

#[test]
fn step_budget_exhaustion_exits_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let rect = domain("rect_2x1.json");
    let out = capdual(&["cap", "--domain", rect.to_str().unwrap(), "--p", "3", "--max-iters", "2"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["body"]["solves"][0]["converged"], Value::Bool(false));
    assert_eq!(json(&dir.path().join("manifest.json"))["status"], "not_converged");
}

#[test]
fn comparability_csv_is_byte_identical_across_runs_and_threads() {
    let sq = domain("square.json");
    let args = ["check-comparability", "--domain", sq.to_str().unwrap(), "--pairs", "2", "--seed", "9"];
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_capdual"))
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .env("CAPDUAL_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&dir.path().join("manifest.json"))["threads"], threads.parse::<u64>().unwrap());
        csvs.push(fs::read(dir.path().join("comparability.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn invalid_thread_count_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let sq = domain("square.json");
    let out = Command::new(env!("CARGO_BIN_EXE_capdual"))
        .args(["map", "--domain", sq.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .env("CAPDUAL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn metric_accepts_negative_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let disk = domain("disk256.json");
    let out = capdual(
        &["metric", "--domain", disk.to_str().unwrap(), "--z1", "-0.5,0", "--z2", "0,-0.5", "--kind", "quasihyperbolic"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = fs::read_to_string(dir.path().join("metric.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);
    assert!(fs::read_to_string(dir.path().join("path.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn geodesic_and_report_summary() {
    let dir = tempfile::tempdir().unwrap();
    let disk = domain("disk256.json");
    let out = capdual(&["geodesic", "--domain", disk.to_str().unwrap(), "--z1", "0,0", "--z2", "0.5,0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let d = json(&dir.path().join("report.json"))["body"]["hyperbolic_distance"].as_f64().unwrap();
    assert!((d - 3f64.ln()).abs() < 0.02 * 3f64.ln());
    for f in ["geodesic.csv", "geodesic.svg", "geodesic_disk.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let out = capdual(&["report"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[body]") && text.contains("hyperbolic_distance:"));
    assert!(dir.path().join("summary.txt").exists());
}
