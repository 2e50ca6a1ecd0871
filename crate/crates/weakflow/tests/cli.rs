//! End-to-end checks of the `weakflow` binary: subcommands, exit codes,
//! artifacts, seed override.

use std::process::Command;

fn weakflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weakflow"))
}

#[test]
fn list_names_the_bundled_scenarios() {
    let out = weakflow().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sphere-ricci-saturation"));
    // machine-readable form parses as a JSON array
    let out = weakflow().args(["list", "--json"]).output().unwrap();
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(parsed.as_array().unwrap().len() >= 10);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = weakflow().args(["list", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_artifacts_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // pass: exit 0
    let out = weakflow()
        .args(["run", "bundled:static-torus-saturation", "--out"])
        .arg(dir.path().join("pass"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in ["report.json", "data.csv", "manifest.json"] {
        assert!(dir.path().join("pass").join(file).exists());
    }
    // detected strict super flow: exit 2 with witnesses
    let out = weakflow()
        .args(["run", "bundled:static-sphere-saturation", "--out"])
        .arg(dir.path().join("fail"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("fail").join("witnesses.csv").exists());
}

#[test]
fn validate_reports_field_level_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"version":1,"seed":1,
            "space":{"model":"flat-torus","dim":1,"size":-2.0,"flow":{"law":"static"}},
            "task":{"kind":"duality","cases":[]}}"#,
    )
    .unwrap();
    let out = weakflow().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("size"),
        "diagnostic should name the field: {err}"
    );

    // a bundled config dumped to disk round-trips through validate + run
    let good = dir.path().join("good.json");
    let config = weakflow::scenario::bundled("static-torus-saturation").unwrap();
    std::fs::write(&good, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let out = weakflow().arg("validate").arg(&good).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn seed_env_var_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = weakflow()
        .args(["run", "bundled:static-torus-saturation", "--out"])
        .arg(dir.path())
        .env("WEAKFLOW_SEED", "12345")
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("12345"), "override should be logged: {log}");
}
