//! End-to-end checks of the `dem` binary: exit codes, output files, and
//! the scene inspection command.

use std::fs;
use std::path::Path;
use std::process::Command;

fn dem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dem"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = "
scene = box_slit
model = practical
particle_count = 64
seed = 11
radius = 0.005
mass = 1.31e-3
domain_min = 0, 0, 0
domain_max = 0.2, 0.2, 0.3
cell_edge = 0.01, 0.01, 0.01
slit_width = 0.02
gravity = 0, 0, -9.81
dt = 1e-5
max_steps = 200
termination_eps = 1e-10
spring_normal = 1e8
spring_tangential = 1e8
restitution = 0.5
friction = 0.4
simple_spring = 1e5
simple_damping = -2.0
simple_shear = -2.0
snapshot_every = 100
";

#[test]
fn run_writes_report_files_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.cfg", SMALL_RUN);
    let out = dir.path().join("results");
    let output = dem()
        .args(["run"])
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("particle-steps/s"), "missing throughput line: {stdout}");

    assert!(out.join("steps.csv").is_file());
    assert!(out.join("summary.json").is_file());
    assert!(out.join("final.dems").is_file());
    assert!(out.join("step_100.dems").is_file());
    assert!(out.join("step_200.dems").is_file());

    let csv = fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(csv.starts_with("step,max_displacement,candidates,contacts"));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scene"], "box_slit");
    assert_eq!(summary["particle_count"], 64);
    assert_eq!(summary["total_steps"], 200);
}

#[test]
fn compare_writes_both_model_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.cfg", SMALL_RUN);
    let out = dir.path().join("cmp");
    let output = dem()
        .args(["compare"])
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    assert!(out.join("steps_simple.csv").is_file());
    assert!(out.join("steps_practical.csv").is_file());
    let compare: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    assert!(compare["simple"]["throughput"].as_f64().unwrap() > 0.0);
    assert!(compare["practical"]["throughput"].as_f64().unwrap() > 0.0);
}

#[test]
fn scene_command_reports_layout_without_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.cfg", SMALL_RUN);
    let output = dem().args(["scene"]).arg(&config).args(["--dry-run"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("box_slit"));
    assert!(stdout.contains("walls"));
    assert!(stdout.contains("overlaps     0 initially"), "stdout: {stdout}");
    // Inspection must not leave result files behind.
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_file_exits_four() {
    let output = dem().args(["run", "/nonexistent/run.cfg"]).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/nonexistent/run.cfg"));
}

#[test]
fn unknown_key_exits_two_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.cfg",
        &format!("{SMALL_RUN}\nnot_a_real_key = 5\n"),
    );
    let output = dem().args(["run"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("not_a_real_key"), "stderr: {stderr}");
}

#[test]
fn geometrically_impossible_slit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.cfg",
        &SMALL_RUN.replace("slit_width = 0.02", "slit_width = 0.005"),
    );
    let output = dem().args(["run"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("slit"), "stderr: {stderr}");
}

#[test]
fn worker_count_flag_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.cfg",
        &SMALL_RUN.replace("max_steps = 200", "max_steps = 20"),
    );
    let out = dir.path().join("w2");
    let output = dem()
        .args(["run"])
        .arg(&config)
        .args(["--workers", "2", "--output"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["workers"], 2);
}
