//! End-to-end tests of the binary: exit codes, failure paths and
//! byte-identical reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_normform"))
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(config: &Path, out: &Path) -> Output {
    bin()
        .args(["run"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn assert_identical_dirs(a: &Path, b: &Path) {
    let mut names: Vec<String> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let left = fs::read(a.join(&name)).unwrap();
        let right = fs::read(b.join(&name)).unwrap();
        assert_eq!(left, right, "{name} differs between reruns");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for scenario in ["transmissible_bistable_2", "simulate_feedforward"] {
        let config = scenario_dir().join(format!("{scenario}.json"));
        let (out_a, out_b) = (tmp.path().join(format!("{scenario}-a")), tmp.path().join(format!("{scenario}-b")));
        assert!(run(&config, &out_a).status.success(), "{scenario} first run");
        assert!(run(&config, &out_b).status.success(), "{scenario} second run");
        assert_identical_dirs(&out_a, &out_b);
    }
}

#[test]
fn unknown_reference_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    fs::write(
        &config,
        r#"{
  "kind": "simulate-normal-form",
  "normal_form": "perpetuum-mobile",
  "signal": { "type": "constant", "value": 0.5 },
  "z0": [0.5],
  "t_span": [0.0, 1.0]
}"#,
    )
    .unwrap();
    let out = run(&config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("perpetuum-mobile"), "stderr: {stderr}");
}

#[test]
fn malformed_json_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("broken.json");
    fs::write(&config, "{ not json").unwrap();
    let out = run(&config, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn broken_inline_system_fails_the_check_with_exit_1() {
    // u^2 input term: not equivariant under scaling
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("broken_equivariance.json");
    fs::write(
        &config,
        r#"{
  "kind": "check-equivariance",
  "system": {
    "states": [ { "name": "x1", "positive": true } ],
    "equations": ["-x1 + u * u"],
    "output": "x1"
  },
  "family": { "scaled": ["x1"] },
  "x_box": [ { "lo": 0.1, "hi": 10.0, "log": true } ],
  "u_box": { "lo": 0.05, "hi": 5.0, "log": true },
  "samples": 50
}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&config, &out_dir);
    assert_eq!(out.status.code(), Some(1));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("FAIL"), "summary: {summary}");
    assert!(summary.contains("worst sample"), "summary: {summary}");
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for entry in fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert!(out.status.success(), "{} failed validation", path.display());
    }
}

#[test]
fn list_examples_names_the_builtins() {
    let out = bin().arg("list-examples").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["feedforward", "bistable-1", "bistable-2", "circadian"] {
        assert!(stdout.contains(name), "missing {name} in: {stdout}");
    }
}

#[test]
fn env_var_sets_the_default_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("from-env");
    let status = bin()
        .args(["run"])
        .arg(scenario_dir().join("rectify_feedforward.json"))
        .env("NORMFORM_OUT", &out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_dir.join("summary.txt").exists());
}
