//! End-to-end runs of the command-line binary: subcommand flows, file
//! outputs, and exit statuses.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsamp"))
        .args(args)
        .output()
        .expect("spawn binary")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_bad_flags_exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["sweep", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    // missing required --out
    assert_eq!(run(&["sweep", "--trials", "1"]).status.code(), Some(1));
    // parameter error: oversampling at the threshold rule's limit
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let res = run(&[
        "sweep",
        "--trials",
        "1",
        "--of",
        "2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn sweep_writes_results_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let res = run(&[
        "sweep",
        "--trials",
        "2",
        "--bits",
        "8",
        "--of",
        "4,10",
        "--comb-n",
        "2000",
        "--seed",
        "5",
        "--refine",
        "8",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let results = std::fs::read_to_string(&out).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2);
    assert!(results.starts_with("trial,bits,of,comb_n,"));
    let agg = std::fs::read_to_string(dir.path().join("results.agg.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2);
}

#[test]
fn sweep_reads_config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "trials=2\nbits=8\nof=4\nrefine=8\nseed=9\n").unwrap();
    let out = dir.path().join("results.csv");
    let res = run(&[
        "sweep",
        "--config",
        path_str(&cfg),
        "--trials",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let results = std::fs::read_to_string(&out).unwrap();
    // 1 trial (flag) x 1 bits x 1 of (config)
    assert_eq!(results.lines().count(), 2);
}

#[test]
fn fixture_then_recover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("capture.txt");
    let truth = dir.path().join("truth.csv");
    let res = run(&[
        "make-fixture",
        "--seed",
        "3",
        "--n-terms",
        "24",
        "--refine",
        "32",
        "--out",
        path_str(&capture),
        "--truth-out",
        path_str(&truth),
    ]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    assert!(truth.exists());

    let recovered = dir.path().join("recovered.csv");
    let res = run(&[
        "recover",
        "--in",
        path_str(&capture),
        "--mode",
        "extra-bit-gated",
        "--cutoff-hz",
        "1000",
        "--out",
        path_str(&recovered),
    ]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("comb_modulo"), "stdout: {stdout}");
    assert!(stdout.contains("lag 2"), "stdout: {stdout}");
    let table = std::fs::read_to_string(&recovered).unwrap();
    assert!(table.starts_with("n,t,"));
    assert!(table.lines().count() > 100);
}

#[test]
fn recover_rejects_malformed_capture_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("bad.txt");
    std::fs::write(
        &capture,
        "bits=8\nts_seconds=2e-5\nlambda=0.1\nextra_bit=true\nchannels=comb_modulo\n999\n",
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let res = run(&[
        "recover",
        "--in",
        path_str(&capture),
        "--cutoff-hz",
        "1000",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(2), "{res:?}");
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("bad.txt:6"), "stderr: {stderr}");
}

#[test]
fn recover_finds_zero_lag_without_injected_delay() {
    let dir = tempfile::tempdir().unwrap();
    let capture_path = dir.path().join("capture.txt");
    let res = run(&[
        "make-fixture",
        "--seed",
        "8",
        "--n-terms",
        "24",
        "--refine",
        "32",
        "--delay",
        "0",
        "--out",
        path_str(&capture_path),
    ]);
    assert_eq!(res.status.code(), Some(0));

    let recovered = dir.path().join("recovered.csv");
    let res = run(&[
        "recover",
        "--in",
        path_str(&capture_path),
        "--mode",
        "itoh",
        "--cutoff-hz",
        "1000",
        "--max-lag",
        "4",
        "--out",
        path_str(&recovered),
    ]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("lag 0"), "stdout: {stdout}");
}

#[test]
fn simulate_dumps_waveforms() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let res = run(&[
        "simulate",
        "--seed",
        "2",
        "--of",
        "10",
        "--comb-n",
        "200",
        "--refine",
        "8",
        "--n-terms",
        "30",
        "--out-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    for name in ["dense.csv", "samples.csv", "breakdown.csv"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.lines().count() > 1, "{name} is empty");
    }
    let dense = std::fs::read_to_string(out_dir.join("dense.csv")).unwrap();
    assert!(dense.starts_with("t,input,folded,comb,mixed,post_lpf"));
}
