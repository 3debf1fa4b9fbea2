use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kamlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kamlab")).args(args).arg("--out").arg(out).env("KAMLAB_GIT_DESCRIBE", "test").output().unwrap()
}

fn report(out: &Path, e: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(format!("{e}.json"))).unwrap()).unwrap()
}

#[test]
fn arith_defaults_pass() {
    let d = tempfile::tempdir().unwrap();
    let o = kamlab(&["arith"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(d.path(), "arith");
    assert_eq!(r["schema"], "kamlab/1");
    assert_eq!(r["git_describe"], "test");
    assert_eq!(r["pass"], true);
    assert!(d.path().join("arith_q_table.csv").exists());
}

#[test]
fn zero_levels_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = kamlab(&["arith", "--override", "levels=0"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_override_key_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(kamlab(&["arith", "--override", "no_such_key=1"], d.path()).status.code(), Some(2));
}

#[test]
fn bad_subcommand_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(kamlab(&["nonsense"], d.path()).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one_and_names_it() {
    let d = tempfile::tempdir().unwrap();
    let o = kamlab(&["arith", "--override", "a=0.05"], d.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("neve"));
    assert_eq!(report(d.path(), "arith")["pass"], false);
}

#[test]
fn config_file_and_overrides_combine() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "orbit", "orbit_steps": 50, "seed": 7}"#).unwrap();
    let o = kamlab(&["orbit", "--config", cfg.to_str().unwrap(), "--override", "symplectic-samples=100"], &d.path().join("out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&d.path().join("out"), "orbit");
    assert_eq!(r["config"]["orbit_steps"], 50);
    assert_eq!(r["config"]["symplectic_samples"], 100);
    assert_eq!(r["config"]["seed"], 7);
}

#[test]
fn config_for_another_experiment_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "bump"}"#).unwrap();
    assert_eq!(kamlab(&["orbit", "--config", cfg.to_str().unwrap()], d.path()).status.code(), Some(2));
}
