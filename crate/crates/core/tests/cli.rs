use std::path::Path;
use std::process::{Command, Output};

fn moneyflow(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moneyflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .args([
            "--nodes", "800", "--grid-k", "20", "--nmf-d", "3", "--trials", "2",
        ])
        .output()
        .expect("binary runs")
}

#[test]
fn stage_without_upstream_artifact_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = moneyflow(dir.path(), &["hodge"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ingest"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = moneyflow(dir.path(), &["bowtie", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = moneyflow(dir.path(), &["nmf", "--radius-km=-3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("radius"));
}

#[test]
fn stages_chain_through_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["synth", "ingest", "bowtie", "hodge"] {
        let o = moneyflow(dir.path(), &[stage]);
        assert!(
            o.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(dir.path().join(stage).join("manifest.json").exists());
    }
    let tsv = std::fs::read_to_string(dir.path().join("bowtie/partition.tsv")).unwrap();
    assert!(tsv.lines().count() > 1);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("hodge/summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary.is_object());
}

#[test]
fn malformed_input_in_strict_mode_fails() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    std::fs::write(&log, "this,is,not,a,transfer\n").unwrap();
    let o = moneyflow(
        dir.path(),
        &["ingest", "--strict", "--input", log.to_str().unwrap()],
    );
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
