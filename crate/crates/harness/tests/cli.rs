use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn embedleak(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embedleak"))
        .current_dir(workspace())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn ingest_and_report_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let o = embedleak(&["ingest", "-c", "configs/smoke.toml"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("synthetic-80: 80 graphs"));
    let o = embedleak(&["report", "-c", "configs/smoke.toml", "--seed", "0"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("## Datasets"));
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = embedleak(&["ingest", "-c", "configs/does-not-exist.toml"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("[config]"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "datasets = [\"X\"]\nbogus = 1\n").unwrap();
    let o = embedleak(&["ingest", "-c", bad.to_str().unwrap()], dir.path());
    assert!(!o.status.success());

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, "datasets = [\"NOT-A-DATASET\"]\n").unwrap();
    let o = embedleak(&["ingest", "-c", missing.to_str().unwrap(), "-d", dir.path().to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("[ingest]"));

    let o = embedleak(&["attack", "membership"], dir.path());
    assert!(!o.status.success());
}
