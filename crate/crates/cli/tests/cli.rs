use std::path::Path;
use std::process::{Command, Output};

use mmtier_cli::parse_config;

fn mmtier(args: &[&str], out: &Path, config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mmtier"));
    cmd.args(args).arg("--out").arg(out).env_remove("MMTIER_THREADS");
    if let Some(text) = config {
        let path = out.with_extension("cfg");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mmtier(
        &["coverage"],
        &tmp.path().join("o"),
        Some("blockage = exponential\nfoo = 1\n"),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("foo"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mmtier"))
        .args(["topology", "--out"])
        .arg(tmp.path())
        .env("MMTIER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_rejects_too_few_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mmtier(&["validate", "--trials", "500"], &tmp.path().join("o"), None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn coverage_sweep_writes_csv_and_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = mmtier(
        &["coverage", "--seed", "42", "--trials", "200", "--quiet"],
        &dir,
        Some("blockage = exponential\ntau_db = 0, 10\nk = 1, 6\n"),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("tau_db,k,coverage_analytic,coverage_mc,mc_ci"));
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0.0,1,"));
    assert!(!csv.contains('\r'));

    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(json["mode"], "coverage");
    assert_eq!(json["config"]["seed"], 42);
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    let reparsed = parse_config(json["config_text"].as_str().unwrap()).unwrap().config;
    assert_eq!(reparsed.seed, 42);
    assert_eq!(reparsed.mc_trials, 200);
}

#[test]
fn throughput_mode_writes_the_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = mmtier(
        &["throughput", "--trials", "0"],
        &dir,
        Some("blockage = exponential\ntau_db = -10, 20\n"),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.join("optimum.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tau_db,k_opt,throughput,error");
    assert!(lines[1].starts_with("-10.0,12,"));
    assert!(lines[2].starts_with("20.0,6,"));
}

fn tier_blocks(dir: &Path) -> usize {
    std::fs::read_to_string(dir.join("topology.dat"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("# tier"))
        .count()
}

#[test]
fn topology_blocks_follow_the_gain() {
    let tmp = tempfile::tempdir().unwrap();
    for (k, blocks) in [(1, 13), (6, 3)] {
        let dir = tmp.path().join(format!("k{k}"));
        let cfg = format!("blockage = exponential\ngain_per_hop = {k}\n");
        let out = mmtier(&["topology", "--quiet"], &dir, Some(&cfg));
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(tier_blocks(&dir), blocks);
        let csv = std::fs::read_to_string(dir.join("topology.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("tier,x,y,scheduled"));
    }
}

#[test]
fn infeasible_split_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mmtier(
        &["topology"],
        &tmp.path().join("o"),
        Some("blockage = exponential\ngain_per_hop = 5\n"),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_window_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = mmtier(
        &["topology", "--quiet"],
        &dir,
        Some("blockage = exponential\nr0_m = 100000\ntopology_window_m = 1\ntopology_guard_m = 0\n"),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read_to_string(dir.join("topology.csv")).unwrap(),
        "tier,x,y,scheduled\n"
    );
}

#[test]
fn validate_notices_a_corrupted_simulator() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = mmtier(
        &["validate", "--quiet"],
        &dir,
        Some("blockage = exponential\ndebug_mc_alpha_nlos = 3\nlaplace_tuples = 2\n"),
    );
    assert_eq!(out.status.code(), Some(3));
    let report = std::fs::read_to_string(dir.join("validation.txt")).unwrap();
    assert!(
        report.lines().any(|l| l.starts_with("FAIL coverage_agreement")),
        "{report}"
    );
}
