#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use formdraft::pipeline::{STATE_FILE, TRANSCRIPT_FILE};

pub const EDIT_FROM: &str = "unknown_field_07";
pub const EDIT_TO: &str = "users[0].phone_number";

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/form14")
}

pub fn form14_pdf() -> PathBuf {
    fixture_dir().join("form14.pdf")
}

pub fn fixture_transcript() -> PathBuf {
    fixture_dir().join(TRANSCRIPT_FILE)
}

/// An offline config: scripted model, recorded page images and OCR.
pub fn write_config(dir: &Path) -> PathBuf {
    let fx = fixture_dir().canonicalize().unwrap();
    let text = format!(
        "mode = \"replay\"\nmodel = \"scripted\"\nbase_url = \"scripted:\"\nrasterizer = {{ recorded = {fx:?} }}\nocr = {{ recorded = {fx:?} }}\n"
    );
    let path = dir.join("offline.toml");
    fs::create_dir_all(dir).unwrap();
    fs::write(&path, text).unwrap();
    path
}

/// The binary with no FORMDRAFT_* settings inherited.
pub fn formdraft() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_formdraft"));
    for (k, _) in std::env::vars() {
        if k.starts_with("FORMDRAFT_") {
            c.env_remove(k);
        }
    }
    c.env("RUST_LOG", "error");
    c
}

pub fn run(args: &[&str]) -> Output {
    formdraft().args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Starts a replayed run in `dir`, stopping at the first gate.
pub fn analyze(dir: &Path, extra: &[&str]) -> Output {
    let cfg = write_config(dir.parent().unwrap());
    let pdf = form14_pdf();
    let mut args = vec![
        "analyze-pdf",
        p(&pdf),
        "--checkpoint",
        p(dir),
        "--config",
        p(&cfg),
        "--transcript",
    ];
    let t = fixture_transcript();
    args.push(p(&t));
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    out
}

pub fn state_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(STATE_FILE)).unwrap()).unwrap()
}

/// Index of the binding for `variable` in the bindings draft.
pub fn binding_index(dir: &Path, variable: &str) -> usize {
    state_json(dir)["payloads"]["bindings"]["bindings"]
        .as_array()
        .unwrap()
        .iter()
        .position(|b| b["variable"] == variable)
        .unwrap()
}
