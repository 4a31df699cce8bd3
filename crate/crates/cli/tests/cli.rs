mod common;

use std::fs;

use common::{determinism_failures, files, run, CONFIGS};

#[test]
fn every_command_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(determinism_failures(dir.path()), Vec::<String>::new());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"delta": 0.1, "unknown_key": 1}"#).unwrap();
    assert_eq!(run("train", &config, &dir.path().join("o")).status.code(), Some(2));

    fs::write(&config, r#"{"portfolio.window_months": 12}"#).unwrap();
    assert_eq!(run("frontier", &config, &dir.path().join("o")).status.code(), Some(2));

    // all-zero data and labels: the squared loss has zero slope everywhere
    fs::write(dir.path().join("zero.csv"), "x1,x2,y\n0,0,0\n0,0,0\n").unwrap();
    fs::write(&config, r#"{"loss": "squared", "data.source": "csv", "data.path": "zero.csv", "data.label": "y"}"#).unwrap();
    let o = run("constants", &config, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_have_expected_names() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, CONFIGS[3].1).unwrap();
    let out = dir.path().join("o");
    assert!(run("worstcase", &config, &out).status.success());
    let names: Vec<String> = files(&out).into_iter().map(|f| f.0).collect();
    assert_eq!(names, ["misclassification.csv", "statics.json", "worstcase.csv"]);
}
