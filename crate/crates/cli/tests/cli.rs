//! End-to-end subcommand tests against the compiled binary: exit codes,
//! artifact layout and rerun determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bte-cli"))
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn jacobian_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["--out"]).arg(dir.path()).arg("jacobian").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = read(dir.path(), "jacobian.json");
    assert!(json.contains("\"passed\": true"));
    assert!(dir.path().join("jacobian.csv").exists());
}

#[test]
fn stretching_cap_reruns_are_byte_identical() {
    let run = |dir: &Path| {
        let out = bin()
            .args(["--out"])
            .arg(dir)
            .args(["--seed", "9", "verify-stretching", "--lemma", "cap", "--samples", "2000"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        read(dir, "verify-stretching.csv")
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(d1.path()), run(d2.path()));
}

#[test]
fn stretching_rejects_unknown_lemma() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out"])
        .arg(dir.path())
        .args(["verify-stretching", "--lemma", "saddle"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_bounds_nu_check_passes_with_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        r#"
experiment = "kernel-bounds"

[kernel]
v_max = 4.0
n_v = 6
c_k = 1.6
"#,
    )
    .unwrap();
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .args(["kernel-bounds", "--check", "nu-bounds"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "kernel-bounds-checks.csv");
    assert!(csv.lines().any(|l| l.starts_with("nu-bounds-low") && l.ends_with("true")));
}

#[test]
fn decay_linear_light_config_passes_and_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        r#"
experiment = "decay-linear"
eps_sweep = [0.5, 0.35]

[kernel]
v_max = 4.0
n_v = 6
c_k = 1.6

[solver]
horizon = 12.0
"#,
    )
    .unwrap();
    let out = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .arg("decay-linear")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("decay-linear-eps0.5.csv").exists());
    assert!(dir.path().join("decay-linear-eps0.35.csv").exists());
    let rates = read(dir.path(), "decay-linear-rates.csv");
    assert_eq!(rates.lines().count(), 3, "header plus one row per epsilon");
}

#[test]
fn report_aggregates_stored_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["--out"]).arg(dir.path()).arg("jacobian").output().unwrap();
    assert!(out.status.success());
    let out = bin().args(["--out"]).arg(dir.path()).arg("report").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("jacobian"));
    assert!(text.contains("true"));
}
