use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fadesched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fadesched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_preset(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let out = fadesched(&["preset", name]);
    assert!(out.status.success());
    let mut cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
    edit(&mut cfg);
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn short(cfg: &mut Value) {
    cfg["horizon"] = 5_000.into();
    cfg["seeds"] = serde_json::json!([1, 2]);
}

#[test]
fn presets_print_parseable_configs() {
    for name in ["fig1", "fig2", "fig3", "example3a"] {
        let out = fadesched(&["preset", name]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        let cfg: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(cfg["name"], name);
    }
}

#[test]
fn unknown_preset_is_a_validation_error() {
    let out = fadesched(&["preset", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig9"));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(fadesched(&["run"]).status.code(), Some(2));
    assert_eq!(fadesched(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset(dir.path(), "example3a", short);
    let out = fadesched(&["run", "--config", &cfg, "--horizon", "10", "--full"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ not json").unwrap();
    let out = fadesched(&["run", "--config", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_preset(dir.path(), "example3a", |c| c["arrivals"]["means"] = serde_json::json!([-1.0]));
    assert_eq!(fadesched(&["analyze", "--config", &cfg]).status.code(), Some(2));

    let cfg = write_preset(dir.path(), "fig1", |c| c["horizon"] = 0.into());
    assert_eq!(fadesched(&["run", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset(dir.path(), "example3a", short);
    let unwritable = dir.path().join("missing").join("out.csv");
    let out = fadesched(&["run", "--config", &cfg, "--out", unwritable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let missing = dir.path().join("nowhere.json");
    let out = fadesched(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_writes_the_same_csv_for_any_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset(dir.path(), "example3a", short);
    let mut outputs = Vec::new();
    for jobs in ["1", "1", "3"] {
        let csv = dir.path().join(format!("out-{}.csv", outputs.len()));
        let out = fadesched(&["run", "--config", &cfg, "--jobs", jobs, "--out", csv.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read(csv).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "config_id,policy,lambda,seed,horizon,mean_total_backlog,backlog_1,throughput_1,little_delay,divergent"
    );
    // 7 sweep values x 2 policies x 2 seeds.
    assert_eq!(lines.count(), 28);
}

#[test]
fn horizon_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset(dir.path(), "example3a", short);
    let out = fadesched(&["run", "--config", &cfg, "--horizon", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(4), Some("2000"));
}

#[test]
fn analyze_reports_the_worked_example_capacity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset(dir.path(), "example3a", short);
    let report = dir.path().join("report.json");
    let out = fadesched(&["analyze", "--config", &cfg, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let theta = report["theta_star"].as_f64().unwrap();
    assert!((theta - 4.0).abs() < 1e-6, "{theta}");
    let points = report["points"].as_array().unwrap();
    assert_eq!(points.len(), 7);
    assert_eq!(points[0]["verdict"], "inside");
    assert!(points[0]["delay_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyze_handles_qos_presets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_preset(dir.path(), "fig3", |_| {});
    let out = fadesched(&["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["points"][0]["delay_bound"].is_null());
    assert_eq!(report["points"][0]["verdict"], "inside");
}
