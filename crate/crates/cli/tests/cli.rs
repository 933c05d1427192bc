use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn netident(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netident"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("run netident")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_example2_reports_blocking_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example2.cfg");
    let o = netident(dir.path(), &["analyze", cfg.to_str().unwrap(), "--target", "1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("B = {8}"), "{text}");
    assert!(text.contains("B = {6} fails 2b, 2c"), "{text}");
    assert!(text.contains("Blocking property holds"), "{text}");
    assert!(dir.path().join("analysis.txt").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("analysis.json")).unwrap()).unwrap();
    assert_eq!(json["partition"]["B"], serde_json::json!([8]));
    assert_eq!(json["property"]["passed"], true);
}

#[test]
fn forced_blocking_set_prints_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example2.cfg");
    let o = netident(dir.path(), &["analyze", cfg.to_str().unwrap(), "--target", "1,2", "--blocking", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("Blocking property fails for B = {6}"), "{text}");
    assert!(text.contains("2b  fails"), "{text}");
}

#[test]
fn json_flag_prints_parseable_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.cfg");
    let o = netident(dir.path(), &["--json", "analyze", cfg.to_str().unwrap(), "--target", "2,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["partition"]["target"], serde_json::json!([2, 1]));
    assert_eq!(json["partition"]["Y"], serde_json::json!([2, 4]));
}

#[test]
fn absent_target_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.cfg");
    let o = netident(dir.path(), &["analyze", cfg.to_str().unwrap(), "--target", "1,4"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
}

#[test]
fn invalid_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    std::fs::write(&cfg, "").unwrap();
    let o = netident(dir.path(), &["analyze", cfg.to_str().unwrap(), "--target", "2,1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error:"));
}

#[test]
fn check_spectra_writes_block_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.cfg");
    let o = netident(dir.path(), &["check-spectra", cfg.to_str().unwrap(), "--target", "2,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Zero-block conditions hold"), "{}", stdout(&o));
    let table = std::fs::read_to_string(dir.path().join("blocks.tsv")).unwrap();
    assert!(table.lines().count() > 1);
}

#[test]
fn simulate_then_identify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("example1.cfg");
    let o = netident(
        dir.path(),
        &["--seed", "4", "simulate", cfg.to_str().unwrap(), "-N", "3000", "--target", "2,1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let data = dir.path().join("data.txt");
    assert!(data.exists());

    let o = netident(
        dir.path(),
        &["--seed", "4", "identify", cfg.to_str().unwrap(), data.to_str().unwrap(), "--target", "2,1", "--starts", "2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("G[2,1] ="), "{}", stdout(&o));
    assert!(dir.path().join("response_G2_1.tsv").exists());
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
    assert!(est["parameters"].as_array().is_some_and(|p| !p.is_empty()));
}

#[test]
fn montecarlo_rerun_from_manifest_is_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let cfg = config("example1.cfg");
    let o = netident(
        first.path(),
        &[
            "--seed", "3", "--grid-size", "64", "montecarlo", cfg.to_str().unwrap(), "--target", "2,1", "-R", "2", "-N",
            "400", "--starts", "1",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = first.path().join("manifest.toml");
    let o = netident(second.path(), &["montecarlo", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["summary.tsv", "errors.tsv", "bias_mimo.tsv", "bias_miso.tsv"] {
        let a = std::fs::read(first.path().join(name)).unwrap();
        let b = std::fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}
