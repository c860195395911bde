use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn snapflow(work: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snapflow"))
        .arg("--config")
        .arg(data("small.toml"))
        .arg("--work-dir")
        .arg(work)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn full_run() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = snapflow(dir.path(), &["run"]);
    assert!(out.status.success(), "run failed: {}", stderr(&out));
    dir
}

#[test]
fn report_matches_checked_in_copy() {
    let dir = full_run();
    let got = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let want = std::fs::read_to_string(data("small_report.txt")).unwrap();
    assert_eq!(got, want);
    assert!(dir.path().join("report.svg").exists());
}

#[test]
fn repeated_runs_produce_identical_artifacts() {
    let (a, b) = (full_run(), full_run());
    for stage in ["ingest", "features", "label", "dataset", "split", "train", "predict", "ensemble", "backtest", "report"] {
        let m = format!("{stage}.manifest");
        assert_eq!(
            std::fs::read_to_string(a.path().join(&m)).unwrap(),
            std::fs::read_to_string(b.path().join(&m)).unwrap(),
            "{m} differs"
        );
    }
}

#[test]
fn missing_upstream_artifact_names_the_stage() {
    let dir = full_run();
    std::fs::remove_file(dir.path().join("folds.txt")).unwrap();
    let out = snapflow(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(4));
    let msg = stderr(&out);
    assert!(msg.contains("split") && msg.contains("folds.txt"), "{msg}");
}

#[test]
fn tampered_artifact_is_refused() {
    let dir = full_run();
    let path = dir.path().join("ensemble.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    let out = snapflow(dir.path(), &["backtest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ensemble"), "{}", stderr(&out));
}

#[test]
fn changed_settings_require_a_rerun() {
    let dir = full_run();
    let out = snapflow(dir.path(), &["--seed", "7", "dataset"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = snapflow(dir.path(), &["--seed", "7", "--from-raw", "dataset"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert!(printed.contains("matrix.csv"));
}

#[test]
fn single_stage_resumes_from_manifests() {
    let dir = full_run();
    let before = std::fs::read_to_string(dir.path().join("backtest.manifest")).unwrap();
    let out = snapflow(dir.path(), &["backtest"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(dir.path().join("backtest.manifest")).unwrap(), before);
}

#[test]
fn show_config_round_trips_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = snapflow(dir.path(), &["--seed", "9", "show-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 9"));
    assert!(text.contains("n_folds = 3"));
    assert!(text.contains("session_len = 6000"));
    let reread = dir.path().join("effective.toml");
    std::fs::write(&reread, &text).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_snapflow"))
        .arg("--config")
        .arg(&reread)
        .arg("show-config")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_folds = 0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_snapflow"))
        .arg("--config")
        .arg(&cfg)
        .arg("show-config")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let cfg2 = dir.path().join("unknown.toml");
    std::fs::write(&cfg2, "no_such_key = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_snapflow")).arg("--config").arg(&cfg2).arg("show-config").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
