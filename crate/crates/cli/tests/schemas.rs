//! CLI JSON checked against the schemas under `schemas/`.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(root().join("schemas").join(name)).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&v).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(args: &[&str]) -> Value {
    let o = Command::new(env!("CARGO_BIN_EXE_hypersim"))
        .arg("--format")
        .arg("json")
        .args(args)
        .current_dir(root())
        .output()
        .unwrap();
    serde_json::from_slice(&o.stdout).unwrap()
}

fn check(name: &str, v: &Value) {
    let errors: Vec<String> = schema(name)
        .iter_errors(v)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

#[test]
fn run_reports_and_traces() {
    for args in [
        &["run", "parity.tm", "--input", "3", "--trace"][..],
        &["run", "looper.tm", "--budget", "100", "--detect-loops", "--trace"],
        &["run", "looper.tm", "--budget", "20"],
        &["run", "even-semi.tm", "--input", "2"],
    ] {
        let v = json(args);
        check("run-report.schema.json", &v);
        for e in v["trace"].as_array().into_iter().flatten() {
            check("trace-event.schema.json", e);
        }
    }
}

#[test]
fn trace_events_round_trip() {
    let v = json(&["run", "parity.tm", "--input", "4", "--trace"]);
    let events = v["trace"].as_array().unwrap();
    assert!(!events.is_empty());
    for e in events {
        let again: Value = serde_json::from_str(&serde_json::to_string(e).unwrap()).unwrap();
        assert_eq!(&again, e);
        check("trace-event.schema.json", &again);
    }
}

#[test]
fn ait_records() {
    check(
        "omega-bound.schema.json",
        &json(&["ait", "omega", "--max-len", "10", "--steps", "1000"]),
    );
    check("shift-record.schema.json", &json(&["ait", "shift", "--n", "2"]));
}

#[test]
fn suite_report() {
    check("suite-report.schema.json", &json(&["suite"]));
}

#[test]
fn schemas_reject_garbage() {
    let bad = serde_json::json!({"outcome": "maybe", "steps": -1});
    assert!(!schema("run-report.schema.json").is_valid(&bad));
    let bad = serde_json::json!({"step": 0, "state": 0, "head": 0, "from": 0, "window": [""]});
    assert!(!schema("trace-event.schema.json").is_valid(&bad));
}
