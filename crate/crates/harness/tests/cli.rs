use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kslab(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
        .args(args)
        .env("KSLAB_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

const CONFIG: &str = r#"
name = "cli"

[sim]
theta = 1.0
n = 8
horizon = 0.2
snapshot_interval = 0.05
replicas = 3
master_seed = 4

[sim.law]
kind = "gaussian_iid"
std = 1.0
"#;

#[test]
fn run_then_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let root = tmp.path().join("out");
    let out = kslab(&root, &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("cli/metadata.json").is_file());

    let out = kslab(&root, &["verify", root.to_str().unwrap(), "--runs-only"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('C')).count(), 12);
    assert!(text.contains("C12 PASS"));
    assert!(root.join("verification.json").is_file());
}

#[test]
fn overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = kslab(tmp.path(), &["run", cfg.to_str().unwrap(), "--set", "name=other", "--set", "sim.replicas=2"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("other/replicas.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn invalid_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = kslab(tmp.path(), &["run", cfg.to_str().unwrap(), "--set", "sim.theta=1.9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("21"));
    let out = kslab(tmp.path(), &["run", cfg.to_str().unwrap(), "--set", "sim.bogus=1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kslab(tmp.path(), &["run", tmp.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tampered_run_fails_verification_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let root = tmp.path().join("out");
    assert!(kslab(&root, &["run", cfg.to_str().unwrap()]).status.success());
    let path = root.join("cli/replicas/0000/events.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push('\n');
    fs::write(&path, text).unwrap();
    let out = kslab(&root, &["verify", root.to_str().unwrap(), "--runs-only"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("checksum mismatch"));
}

#[test]
fn table_prints_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kslab(tmp.path(), &["table", "--theta", "2", "--n", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("2,")));
    assert!(text.contains("k2 = "));
}

#[test]
fn bessel_rejects_too_few_replicas() {
    let tmp = tempfile::tempdir().unwrap();
    let out = kslab(tmp.path(), &["bessel", "--dimension", "3", "--replicas", "10"]);
    assert_eq!(out.status.code(), Some(1));
}
