use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qfi::scan::{ScanRecord, SCAN_HEADER, SCHEMA_VERSION};
use qfi::series::TIMESERIES_HEADER;
use serde_json::Value;

fn qfi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

const SMALL_SCAN: &[&str] = &[
    "scan", "--model", "kicked-top", "--J", "8", "--k", "3", "--t", "3", "--grid", "4x3", "--r", "6",
    "--out", "out",
];

#[test]
fn unknown_config_key_exits_two_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "model = \"kicked-top\"\nJ = 8.0\nbogus = 1\n").unwrap();
    let out = qfi(&["scan", "--config", "run.toml", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfi(&["scan", "--model", "kicked-top", "--J", "2.3", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
    let out = qfi(&["scan", "--model", "henon-heiles", "--out", "out"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = qfi(&["scan", "--grid", "4by3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_errors_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfi(&["exact", "--model", "kicked-top", "--json-errors"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "config");
    assert_eq!(v["error"]["exit_code"], 2);
}

#[test]
fn numerical_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // A 4 kB budget cannot hold the propagator.
    fs::write(dir.path().join("run.toml"), "max_memory_gb = 0.000004\n").unwrap();
    let mut args = SMALL_SCAN.to_vec();
    args.extend(["--config", "run.toml"]);
    let out = qfi(&args, dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dry_run_reports_sizes_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_SCAN.to_vec();
    args.push("--dry-run");
    let out = qfi(&args, dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["dim"], 17);
    assert_eq!(v["grid_points"], 12);
    assert_eq!(v["exact_memory_bytes"], 3 * 16 * 17 * 17);
    assert!(v["estimated_seconds"]["semiclassical"].as_f64().unwrap() > 0.0);
    assert!(!dir.path().join("out").exists());

    let big = qfi(&["exact", "--model", "kicked-top", "--J", "4096", "--dry-run"], dir.path());
    let v: Value = serde_json::from_slice(&big.stdout).unwrap();
    assert_eq!(v["dim"], 8193);
    assert_eq!(v["ensemble_points_per_state"], 0);
}

#[test]
fn scan_outputs_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfi(SMALL_SCAN, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    assert_eq!(files(&out_dir), ["scan.csv", "scan.json", "scan.timings.json"]);

    let csv = fs::read_to_string(out_dir.join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SCAN_HEADER));
    assert_eq!(SCAN_HEADER, "phi,z,I_exact,I_sc,delta_I");
    let records: Vec<ScanRecord> = lines.map(|l| ScanRecord::parse(l).unwrap()).collect();
    assert_eq!(records.len(), 12);
    for r in &records {
        assert!(r.i_exact > 0.0 && r.i_sc > 0.0);
        assert!((0.0..=1.0).contains(&r.delta_i));
    }

    let meta: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("scan.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], SCHEMA_VERSION);
    assert_eq!(meta["kind"], "scan");
    assert_eq!(meta["spec"]["model"], "kicked-top");
    assert_eq!(meta["spec"]["J"], 8.0);
    assert_eq!(meta["heisenberg_time"], 17.0);
    assert_eq!(meta["aggregates"]["n_records"], 12);
    assert_eq!(meta["config"]["J"], 8.0);
    let digest = qfi::scan::sha256_hex(csv.as_bytes());
    assert_eq!(meta["csv_sha256"], digest.as_str());

    // A second run with the same spec finds the finished scan and leaves it
    // unchanged; a different spec is refused.
    let before = fs::read(out_dir.join("scan.csv")).unwrap();
    assert!(qfi(SMALL_SCAN, dir.path()).status.success());
    assert_eq!(fs::read(out_dir.join("scan.csv")).unwrap(), before);
    let mut other = SMALL_SCAN.to_vec();
    other.extend(["--beta", "1.4"]);
    assert_eq!(qfi(&other, dir.path()).status.code(), Some(2));
}

#[test]
fn single_point_queries() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfi(
        &["exact", "--model", "kicked-top", "--J", "10", "--k", "0", "--t", "2", "--point", "0,1", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["i_exact"].as_f64().unwrap() - 80.0).abs() < 1e-8);
    assert!(v["i_sc"].is_null() || v["i_sc"].as_f64().is_none_or(f64::is_nan));

    let out = qfi(
        &["semiclassical", "--model", "kicked-rotor", "--M", "50", "--t", "3", "--point", "1,-2", "--r", "4", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["i_sc"].as_f64().unwrap() > 0.0);
}

#[test]
fn timeseries_from_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ts.toml"),
        r#"
model = "kicked-top"
J = 10.0
k = 2.0
r = 8

[timeseries]
times = [1.0, 2.0, 4.0]
states = [
  { label = "a", center = [1.0, 0.2] },
  { label = "b", center = [4.0, -0.5] },
]
"#,
    )
    .unwrap();
    let out = qfi(&["timeseries", "--config", "ts.toml", "--out", "o", "--name", "ts"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/ts.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TIMESERIES_HEADER));
    assert_eq!(lines.count(), 6);
    let meta: Value = serde_json::from_slice(&fs::read(dir.path().join("o/ts.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], SCHEMA_VERSION);
    assert_eq!(meta["heisenberg_time"], 21.0);
}

#[test]
fn converge_r_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[converge]\nr_values = [2, 4, 6]\n").unwrap();
    let out = qfi(
        &["converge-r", "--config", "c.toml", "--model", "kicked-top", "--J", "16", "--t", "2", "--grid", "3x2", "--out", "o"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/converge_r.csv")).unwrap();
    assert!(csv.starts_with("r,mean_I_sc,var_I_sc,rel_mean,rel_var\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().starts_with("6,"));
}
