use std::fs;

use leogo::cli::run;

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("leogo").chain(list.iter().copied()).map(String::from).collect()
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(run(args(&["--help"])), 0);
    assert_eq!(run(args(&["--version"])), 0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(args(&["dispatch", "--nonsense"])), 1);
    assert_eq!(run(args(&["dispatch", "--demand-dip", "0.2:500"])), 1);
}

#[test]
fn exported_scenario_validates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.toml");
    let p = path.to_str().unwrap();
    assert_eq!(run(args(&["export-scenario", "--case", "B", "--out", p])), 0);
    assert_eq!(run(args(&["validate", "--scenario", p])), 0);
    let text = fs::read_to_string(&path).unwrap().replace("reserve_requirement = 5.0", "reserve_requirement = -1.0");
    fs::write(&path, text).unwrap();
    assert_eq!(run(args(&["validate", "--scenario", p])), 1);
}

#[test]
fn dispatch_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(args(&["dispatch", "--duration", "1000", "--demand-dip", "0.2:500:750", "--out", out]));
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("dispatch.csv")).unwrap();
    assert!(csv.starts_with("t_min,gt1_mw,gt2_mw,gt3_mw,wind_mw"));
    assert_eq!(csv.lines().count(), 201);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["on_count_runs"], serde_json::json!([3, 2, 3]));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario_sha256"].as_str().unwrap().len(), 64);
    assert!(!manifest["args"].as_array().unwrap().iter().any(|a| a == "--out"));
}

#[test]
fn instability_and_nonconvergence_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(args(&["dynamics", "--setpoints", "15,off,off", "--trip", "gt1", "--out", out])), 2);
    assert_eq!(run(args(&["powerflow", "--multiplier", "40", "--out", out])), 2);
}

#[test]
fn powerflow_and_dynamics_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(args(&["powerflow", "--out", out])), 0);
    let buses = fs::read_to_string(dir.path().join("buses.csv")).unwrap();
    assert!(buses.starts_with("id,kv,v_pu,angle_deg"));
    assert_eq!(run(args(&["dynamics", "--trip", "GT2", "--duration", "5", "--out", out])), 0);
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t_s,f_hz,gt1_mw"));
}
