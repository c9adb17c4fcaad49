#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

pub fn ctxshap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxshap"))
        .args(args)
        .env_remove("CTXSHAP_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The flags for the liver fixture, writing to `out`.
pub fn liver_args(out: &Path) -> Vec<String> {
    vec![
        "--model".into(),
        fixture("liver_model.json"),
        "--background".into(),
        fixture("liver_background.csv"),
        "--instances".into(),
        fixture("liver_instances.csv"),
        "--context".into(),
        fixture("liver_context.json"),
        "--out".into(),
        out.display().to_string(),
    ]
}

pub fn replay_args() -> Vec<String> {
    vec![
        "--mode".into(),
        "replay".into(),
        "--fixtures".into(),
        fixture("replay"),
    ]
}

pub fn run(parts: &[Vec<String>]) -> Output {
    let args: Vec<&str> = parts.iter().flatten().map(String::as_str).collect();
    ctxshap(&args)
}

pub fn strs(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
