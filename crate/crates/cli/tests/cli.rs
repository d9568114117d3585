use std::process::{Command, Output};

use serde_json::Value;

fn distsup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distsup")).args(args).output().expect("binary runs")
}

// Exit code 1 reports a negative verdict, 2 an error.
fn json(args: &[&str]) -> Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = distsup(&all);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn parse_print_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let out = distsup(&["parse", "builtin:machines", "--print"]);
    assert!(out.status.success());
    let path = dir.path().join("machines.model");
    std::fs::write(&path, &out.stdout).unwrap();
    let again = distsup(&["parse", path.to_str().unwrap(), "--print"]);
    assert!(again.status.success());
    assert_eq!(out.stdout, again.stdout);
    let summary = json(&["parse", path.to_str().unwrap()]);
    assert_eq!(summary["plants"].as_array().unwrap().len(), 4);
    assert_eq!(summary["requirements"].as_array().unwrap().len(), 8);
}

#[test]
fn syntax_errors_report_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.model");
    std::fs::write(&path, "plant G {\n  states: ???\n").unwrap();
    let out = distsup(&["parse", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2:9"), "{err}");
}

#[test]
fn localize_then_check_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    let loc = json(&["localize", "builtin:machines", "--out", bundle.to_str().unwrap()]);
    assert!(loc.is_object());
    assert!(bundle.join("shared_events.json").exists());
    let rep = json(&["check-controller", bundle.to_str().unwrap()]);
    assert_eq!(rep["finite_response"], true);
    assert_eq!(rep["confluent"], false);
    assert!(rep["witnesses"]["confluence"].is_object());
}

#[test]
fn check_delay_then_instrument() {
    let d = json(&["check-delay", "builtin:machines"]);
    assert_eq!(d["report"]["robust"], false);
    assert_eq!(d["sup_prime_states"], 106);
    let i = json(&["instrument", "builtin:machines"]);
    assert_eq!(i["recheck"]["report"]["robust"], true);
}

#[test]
fn pipeline_persists_under_run_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_distsup"))
        .args(["--json", "pipeline", "builtin:crossed"])
        .env("DISTSUP_RUN_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let run = std::path::PathBuf::from(v["run_dir"].as_str().unwrap());
    assert!(run.starts_with(dir.path()));
    assert!(run.join("manifest.json").exists());
    assert!(!v["updated"].as_array().unwrap().is_empty());

    let again = Command::new(env!("CARGO_BIN_EXE_distsup"))
        .args(["--json", "pipeline", "builtin:crossed"])
        .env("DISTSUP_RUN_DIR", dir.path())
        .output()
        .unwrap();
    let v2: Value = serde_json::from_slice(&again.stdout).unwrap();
    assert!(v2["updated"].as_array().unwrap().is_empty());
}

#[test]
fn simulate_trace_and_adversarial() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let v = json(&["simulate", "builtin:machines", "--max-ticks", "30", "--trace-out", trace.to_str().unwrap()]);
    assert_eq!(v["verdict"]["safety"], true);
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() > 0);

    let hit = json(&["simulate", "builtin:machines", "--raw", "--adversarial", "20", "--delays", "2"]);
    assert!(hit.is_object());
    let safe = json(&["simulate", "builtin:machines", "--adversarial", "20", "--delays", "2"]);
    assert!(safe.is_null());
}

#[test]
fn bad_scenario_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"injections":[{"tick":1,"event":"G1.start"}],"assertions":[]}"#).unwrap();
    let out = distsup(&["simulate", "builtin:machines", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("G1.start"));
}

#[test]
fn unknown_builtin_is_rejected() {
    let out = distsup(&["parse", "builtin:nope"]);
    assert!(!out.status.success());
}
