use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rkhs_fusion::pipeline::TransferMessage;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkhs-fusion"))
        .args(args)
        .output()
        .unwrap()
}

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/two_agent_cubic.json")
}

#[test]
fn pipeline_then_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = bin(&[
        "pipeline",
        "--config",
        config().to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for name in ["estimates.csv", "metrics.json", "operators.json", "messages.jsonl"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let fuse = bin(&["fuse", "--out-dir", out.to_str().unwrap()]);
    assert!(fuse.status.success(), "{}", String::from_utf8_lossy(&fuse.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fuse.stdout).unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn fit_prints_an_upload_message() {
    let out = bin(&["fit", "--config", config().to_str().unwrap(), "--agent", "2"]);
    assert!(out.status.success());
    let msg: TransferMessage = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(msg.agent_id.number(), 2);
    assert_eq!(msg.coeffs.len(), 4);
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let missing = bin(&["pipeline", "--config", "/no/such/config.json"]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: config:"));

    let dir = tempfile::tempdir().unwrap();
    let fuse = bin(&["fuse", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!fuse.status.success());
    assert!(String::from_utf8_lossy(&fuse.stderr).starts_with("error: replay:"));

    assert!(!bin(&["fit", "--config", config().to_str().unwrap(), "--agent", "3"])
        .status
        .success());
}
