//! End-to-end checks of the `villebet` binary: JSON config merging, CSV
//! reproducibility, and exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_villebet"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("villebet-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn trace_from_json_config_is_reproducible() {
    let cfg_path = scratch("trace.json");
    let out_a = scratch("a.csv");
    let out_b = scratch("b.csv");
    fs::write(
        &cfg_path,
        r#"{"m0": 0.5, "stream": "bernoulli:p=0.5", "horizon": 200, "nodes_per_side": 64, "seed": 7}"#,
    )
    .unwrap();
    for out in [&out_a, &out_b] {
        let status = bin()
            .args(["trace", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "identical (spec, seed) must give identical traces");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("n,x_n,S_n,V_n,lnW_uniform"));
    assert_eq!(text.lines().next().unwrap().split(',').count(), 23);
}

#[test]
fn flags_override_config() {
    let cfg_path = scratch("override.json");
    let out = scratch("o.csv");
    fs::write(
        &cfg_path,
        r#"{"m0": 0.5, "stream": "constant:x=1", "horizon": 50, "nodes_per_side": 64, "prior": "robbins"}"#,
    )
    .unwrap();
    let output = bin()
        .args(["trace", "--config"])
        .arg(&cfg_path)
        .args(["--horizon", "10", "--checkpoints", "10"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2, "one checkpoint row expected");
    assert!(text.lines().nth(1).unwrap().starts_with("10,"));
}

#[test]
fn check_bounds_passes_on_small_corpus() {
    let output = bin()
        .args([
            "check-bounds",
            "--m0",
            "0.5",
            "--horizon",
            "300",
            "--nodes-per-side",
            "64",
            "--seeds-per-family",
            "1",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("all bounds hold"), "{stdout}");
}

#[test]
fn bad_input_exits_with_error_code() {
    let output = bin()
        .args(["trace", "--m0", "0.5", "--stream", "cauchy:x=1", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin()
        .args(["growth", "--m0", "0.5", "--stream", "bernoulli:p=0.5", "--horizon", "100"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "horizon precondition");
}
