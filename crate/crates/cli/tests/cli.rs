//! End-to-end tests of the `platoon` binary: exit codes, file outputs and
//! determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_platoon"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(tag);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_reference_scenario() {
    let dir = tmp_dir("simulate_ok");
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(scenario_path("paper_fig4.scenario"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let log = fs::read_to_string(dir.join("log.csv")).unwrap();
    // 20 s at ts = 0.01: samples t = 0..=20 inclusive, plus the header
    assert_eq!(log.lines().count(), 2002);
    assert!(log.starts_with("t,veh0_q"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["samples"], 2001);
    assert_eq!(report["followers"][0]["stability"]["verdict"], "stable");
    assert_eq!(report["followers"].as_array().unwrap().len(), 1);
}

#[test]
fn simulate_missing_file_exits_2() {
    let dir = tmp_dir("simulate_missing");
    let out = bin()
        .args(["simulate", "--scenario", "no_such_file.scenario", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot read"));
}

#[test]
fn simulate_misaligned_phi_exits_2_with_message() {
    let dir = tmp_dir("simulate_misaligned");
    let text = fs::read_to_string(scenario_path("paper_fig4.scenario"))
        .unwrap()
        .replace("phi = 0.15", "phi = 0.155");
    let bad = dir.join("bad.scenario");
    fs::write(&bad, text).unwrap();
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(&bad)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("phi not an integer multiple of ts"));
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir_a = tmp_dir("determinism_a");
    let dir_b = tmp_dir("determinism_b");
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .args(["simulate", "--scenario"])
            .arg(scenario_path("paper_fig4.scenario"))
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(dir_a.join("log.csv")).unwrap();
    let b = fs::read(dir_b.join("log.csv")).unwrap();
    assert_eq!(
        a, b,
        "identical invocations must produce byte-identical CSV"
    );
}

#[test]
fn stability_reference_parameters_exit_0() {
    let out = bin().args(["stability"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("spectral radius 0.996511678"));
    assert!(text.contains("verdict stable"));
}

#[test]
fn stability_zero_gains_exit_1() {
    // zero gains leave an open integrator: an eigenvalue sits exactly on
    // the unit circle, which the guard band reports as marginal
    let out = bin()
        .args(["stability", "--kp", "0", "--kd", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(
        text.contains("marginal") || text.contains("unstable"),
        "stdout: {text}"
    );
}

#[test]
fn stability_zero_delay_prints_three_eigenvalues() {
    let out = bin().args(["stability", "--phi", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("dimension 3,"));
    assert_eq!(text.matches("lambda =").count(), 3);
}

#[test]
fn stability_from_scenario() {
    let out = bin()
        .args(["stability", "--scenario"])
        .arg(scenario_path("paper_fig4.scenario"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("dimension 33"));
}

#[test]
fn scan_single_point_matches_stability() {
    let out = bin()
        .args(["scan", "--grid", "kp=0.2:0.2:1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("kp,spectral_radius,stable,status"));
    assert!(text.contains("9.96511678283532e-1,true,\"ok\""));
}

#[test]
fn scan_grid_has_full_cardinality() {
    let dir = tmp_dir("scan_grid");
    let out = bin()
        .args(["scan", "--grid", "kp=0.05:1.0:20,kd=0.05:1.0:20", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(dir.join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 401); // header + 400 rows
    let stable_rows = csv.lines().filter(|l| l.ends_with("true,\"ok\"")).count();
    assert!(
        stable_rows > 100,
        "expected a large stable region, got {stable_rows}"
    );
}

#[test]
fn scan_rejects_bad_grid() {
    let out = bin()
        .args(["scan", "--grid", "vmax=0:1:5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown grid axis"));
}

#[test]
fn scan_records_per_point_failures() {
    let out = bin()
        .args(["scan", "--grid", "phi=0.15:0.155:2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("1 failed"));
    assert!(text.contains("phi not an integer multiple of ts"));
}

#[test]
fn compare_reference_scenario() {
    let dir = tmp_dir("compare_ok");
    let out = bin()
        .args(["compare", "--scenario"])
        .arg(scenario_path("paper_fig4.scenario"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("compare_report.json")).unwrap())
            .unwrap();
    let ratio = report["peak_x3_ratio"].as_f64().unwrap();
    assert!((ratio - 1.202).abs() < 0.02 * 1.202, "ratio {ratio}");
    assert_eq!(report["outputs"].as_array().unwrap().len(), 4);
    for name in [
        "predictor.csv",
        "conventional.csv",
        "reference_compensated.csv",
        "reference_delayed.csv",
    ] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn compare_zero_delay_controllers_coincide() {
    let dir = tmp_dir("compare_d0");
    let text = fs::read_to_string(scenario_path("paper_fig4.scenario"))
        .unwrap()
        .replace("phi = 0.15", "phi = 0.0");
    let scenario = dir.join("no_delay.scenario");
    fs::write(&scenario, text).unwrap();
    let out = bin()
        .args(["compare", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let pred = fs::read(dir.join("predictor.csv")).unwrap();
    let conv = fs::read(dir.join("conventional.csv")).unwrap();
    assert_eq!(
        pred, conv,
        "at zero delay the two controllers must produce identical logs"
    );
}

#[test]
fn heterogeneous_scenario_runs() {
    let dir = tmp_dir("hetero");
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(scenario_path("heterogeneous.scenario"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["followers"].as_array().unwrap().len(), 3);
    for f in report["followers"].as_array().unwrap() {
        assert_eq!(f["stability"]["verdict"], "stable");
    }
}
