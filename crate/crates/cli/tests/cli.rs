use std::path::Path;
use std::process::{Command, Output};

fn smbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smbp")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{
  "workload": {"job_count": 150, "size_mix": [[1, 0.4], [4, 0.4], [16, 0.2]],
               "lower_range": [0.3, 0.6], "upper_range": [0.7, 1.0],
               "loc_range": [0.1, 0.5], "scale_range": [0.1, 0.5],
               "kind": "truncated-gaussian"},
  "machine_sizes": [32, 72],
  "variants": [{"variant": "gaussian"}, {"variant": "hoeffding", "alpha_grid": [0.9]}],
  "alpha_grid": [0.9, 0.99],
  "replicas": 2,
  "mc_samples": 300,
  "base_seed": 11
}"#,
    )
    .unwrap();
    path
}

#[test]
fn run_missing_config_fails() {
    let out = smbp(&["run", "--config", "/nonexistent/smbp.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn run_rejects_bad_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"workload": {}, "machine_sizes": [32]}"#).unwrap();
    let out = smbp(&["run", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = smbp(&["launch"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = smbp(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("savings%"));
    let out = smbp(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--sequential"]);
    assert!(out.status.success());
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    // header + 2 replicas × (gaussian 2α×2 sizes + hoeffding 1α×2 sizes)
    assert_eq!(text.lines().count(), 1 + 2 * (4 + 2));
}

#[test]
fn run_seed_and_algorithm_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = smbp(&["run", "--config", cfg.to_str().unwrap(), "--seed", "5", "--algorithm", "first-fit"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",first-fit,")));
    let out = smbp(&["run", "--config", cfg.to_str().unwrap(), "--algorithm", "worst-fit"]);
    assert!(!out.status.success());
}

#[test]
fn audit_is_deterministic() {
    let args = ["audit", "--seed", "7", "--instances", "120", "--lemma-sets", "20000"];
    let a = smbp(&args);
    let b = smbp(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn frontier_default_table() {
    let out = smbp(&["frontier"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n2,max_n1"));
    // No class-2 jobs: 30 / 0.65 deterministic jobs.
    assert_eq!(lines.next(), Some("0,46"));
}

#[test]
fn single_traces_each_machine() {
    let out = smbp(&["single", "--jobs", "200", "--samples", "200", "--size", "32"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("machines="));
    let machines: usize = last["machines=".len()..].split(' ').next().unwrap().parse().unwrap();
    assert_eq!(text.lines().count(), machines + 3);
}
