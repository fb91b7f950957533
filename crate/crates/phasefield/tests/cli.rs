//! Drives the installed `solver` binary end to end: exit codes, strict
//! config rejection, artifact layout, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn solver() -> Command {
    Command::new(env!("CARGO_BIN_EXE_solver"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    solver()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--output")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const COMPONENTS_CONFIG: &str = r#"{
  "command": "components",
  "seed": 7,
  "domain": {"type": "box", "extent": [1.5, 1.5], "origin": [-0.75, -0.75]},
  "grid": {"cells_per_axis": [96, 96]},
  "params": {"epsilon": 0.04, "sigma": 0.1},
  "shape": [
    {"type": "ball", "center": [-0.45, 0.0], "radius": 0.2},
    {"type": "ball", "center": [0.45, 0.0], "radius": 0.2}
  ],
  "recovery": {"delta": 0.05}
}"#;

#[test]
fn profile_check_succeeds_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", r#"{"command": "profile-check", "seed": 1}"#);
    let out_dir = tmp.path().join("out");
    let out = run("profile-check", &cfg, &out_dir);
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        stderr_of(&out)
    );
    assert!(out_dir.join("run.json").is_file());
    let csv = fs::read_to_string(out_dir.join("profile_residuals.csv")).unwrap();
    assert!(csv.starts_with("r,ode_residual,equipartition_residual\n"));
    assert_eq!(csv.lines().count(), 1001);
}

#[test]
fn bad_sigma_exits_two_with_the_exact_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
  "command": "recover",
  "seed": 1,
  "domain": {"type": "box", "extent": [1.0, 1.0]},
  "grid": {"cells_per_axis": [64, 64]},
  "params": {"epsilon": 0.05, "sigma": 1.5},
  "shape": [{"type": "ball", "center": [0.5, 0.5], "radius": 0.3}]
}"#,
    );
    let out = run("recover", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("sigma must lie in (0,1)"),
        "stderr was: {}",
        stderr_of(&out)
    );
}

#[test]
fn unknown_config_key_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{"command": "profile-check", "seed": 1, "mystery_knob": 3}"#,
    );
    let out = run("profile-check", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("mystery_knob"));
}

#[test]
fn unknown_command_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", r#"{"command": "profile-check", "seed": 1}"#);
    let out = run("transmogrify", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("transmogrify"));
}

#[test]
fn missing_config_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        "profile-check",
        &tmp.path().join("nope.json"),
        &tmp.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn components_run_is_byte_identical_across_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", COMPONENTS_CONFIG);

    let mut artifacts: Vec<(String, String, String)> = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = tmp.path().join(tag);
        let out = run("components", &cfg, &out_dir);
        assert!(
            out.status.success(),
            "expected success, stderr: {}",
            stderr_of(&out)
        );
        artifacts.push((
            fs::read_to_string(out_dir.join("components.csv")).unwrap(),
            fs::read_to_string(out_dir.join("u.vtk")).unwrap(),
            fs::read_to_string(out_dir.join("run.json")).unwrap(),
        ));
    }
    let (csv_a, vtk_a, _run_a) = &artifacts[0];
    let (csv_b, vtk_b, _run_b) = &artifacts[1];
    assert_eq!(csv_a, csv_b, "components.csv differs between identical runs");
    assert_eq!(vtk_a, vtk_b, "u.vtk differs between identical runs");

    // Two distinct interface loops in this geometry.
    assert!(csv_a.lines().nth(1).unwrap().starts_with("2,"));
}

#[test]
fn run_json_echoes_the_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", COMPONENTS_CONFIG);
    let out_dir = tmp.path().join("out");
    let out = run("components", &cfg, &out_dir);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(echoed["command"], "components");
    assert_eq!(echoed["seed"], 7);
    assert_eq!(echoed["params"]["epsilon"], 0.04);
    assert_eq!(
        echoed["output_dir"],
        serde_json::Value::String(out_dir.to_string_lossy().into_owned())
    );
}

#[test]
fn sweep_writes_fitted_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        r#"{
  "command": "sweep",
  "seed": 3,
  "domain": {"type": "box", "extent": [1.0, 1.0]},
  "grid": {"cells_per_axis": [4, 4]},
  "params": {"epsilon": 0.08, "sigma": 0.1},
  "shape": [{"type": "ball", "center": [0.5, 0.5], "radius": 0.3}],
  "sweep": {"epsilons": [0.08, 0.06, 0.04]},
  "inner": {"max_iters": 10, "restarts": 0}
}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run("sweep", &cfg, &out_dir);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with(
        "epsilon,h,delta,willmore,area,area_penalty,baseline,inner_value,connect_penalty,total,component_count\n"
    ));
    assert_eq!(csv.lines().filter(|l| l.starts_with("0.0")).count(), 3);
    assert!(csv.lines().any(|l| l.starts_with("fitted_order,area_error,")));
}
