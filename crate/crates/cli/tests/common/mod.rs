//! Shared between the CLI tests and the acceptance run.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_ot-dro");

pub const CONFIGS: [(&str, &str); 7] = [
    ("train", r#"{"loss": "logistic", "delta": 0.01, "data.n": 64, "data.d": 2, "iterations": 2000, "seed": 3}"#),
    ("train", r#"{"loss": "hinge", "delta": 0.01, "data.n": 64, "data.d": 2, "iterations": 2000, "seed": 3}"#),
    (
        "compare",
        r#"{"loss": "squared", "delta": 0.01, "r_beta": 2.0, "data.n": 64, "data.d": 2, "iterations": 2000, "reference_iterations": 200, "seed": 5}"#,
    ),
    ("worstcase", r#"{"loss": "logistic", "data.n": 32, "data.d": 2, "iterations": 1000, "seed": 1}"#),
    (
        "frontier",
        r#"{"portfolio.months": 36, "portfolio.assets": 3, "portfolio.window_months": 24, "portfolio.zeta_grid": [0.0, 0.05], "delta_grid": [0.0, 0.001], "seed": 2}"#,
    ),
    ("constants", r#"{"loss": "logistic", "delta": 0.01, "data.n": 64, "data.d": 3}"#),
    ("check", r#"{"seed": 4}"#),
];

pub fn run(cmd: &str, config: &Path, out: &Path) -> std::process::Output {
    Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

pub fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

/// Runs every configured command twice into fresh directories; returns the
/// commands whose outputs differ or that failed.
pub fn determinism_failures(dir: &Path) -> Vec<String> {
    let mut bad = Vec::new();
    for (j, (cmd, json)) in CONFIGS.iter().enumerate() {
        let config = dir.join(format!("c{j}.json"));
        fs::write(&config, json).unwrap();
        let (a, b) = (dir.join(format!("a{j}")), dir.join(format!("b{j}")));
        let ok = [&a, &b].iter().all(|out| run(cmd, &config, out).status.success());
        if !ok {
            bad.push(format!("{cmd}#{j} failed"));
        } else if files(&a).is_empty() || files(&a) != files(&b) {
            bad.push(format!("{cmd}#{j} differs"));
        }
    }
    bad
}
