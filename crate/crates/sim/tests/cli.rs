use std::path::Path;

use secagg_sim::harness::cli::main_with_args;
use secagg_sim::harness::{EXIT_CONFIG, EXIT_OK};

const GOLDEN_HEADER: &str = "iter,entity_kind,entity_id,phase,msg_type,bytes_sent,bytes_recv,cpu_us,round,outcome";

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(std::iter::once("secagg").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn small_run(out: &Path, seed: &str) -> i32 {
    let args = ["run", "--clients", "10", "--decryptors", "4", "--len", "8", "--iters", "2", "--seed", seed];
    let (code, _, err) = run(&[&args[..], &["--out", out.to_str().unwrap()]].concat());
    assert!(err.is_empty(), "{err}");
    code
}

#[test]
fn csv_header_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    assert_eq!(small_run(&path, "1"), EXIT_OK);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(GOLDEN_HEADER));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 10));
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    small_run(&a, "5");
    small_run(&b, "5");
    small_run(&c, "6");
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn trials_fan_out_to_separate_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let args = ["run", "--clients", "8", "--decryptors", "4", "--len", "4", "--iters", "1", "--trials", "2"];
    let (code, log, _) = run(&[&args[..], &["--group", "tiny", "--out", out.to_str().unwrap()]].concat());
    assert_eq!(code, EXIT_OK);
    assert!(log.contains("trial 1 (seed 1)"));
    assert!(dir.path().join("runs-trial0.csv").exists());
    assert!(dir.path().join("runs-trial1.csv").exists());
}

#[test]
fn config_errors_exit_two() {
    let (code, _, err) = run(&["run", "--decryptors", "10", "--threshold", "3", "--eta-c", "0.2", "--eta-d", "0.2"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("config error"));
    assert_eq!(run(&["run", "--mode", "threeround"]).0, EXIT_CONFIG);
    assert_eq!(run(&["run", "--dropout", "0.3"]).0, EXIT_CONFIG);
    assert_eq!(run(&["frobnicate"]).0, EXIT_CONFIG);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "clients=10\nthreshold=oops\n").unwrap();
    let (code, _, err) = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn attack_scenarios_hold() {
    let common = ["--clients", "12", "--decryptors", "6", "--threshold", "4", "--len", "4", "--dropout", "0"];
    let (code, log, _) = run(&[&["attack", "inconsistent-sets", "--split", "3"][..], &common].concat());
    assert_eq!(code, EXIT_OK, "{log}");
    assert!(log.contains("masks recoverable for 0 view(s); server outcome abort"), "{log}");
    let (code, log, _) = run(&[&["attack", "inconsistent-model"][..], &common].concat());
    assert_eq!(code, EXIT_OK, "{log}");
    assert!(log.contains("outcome wrong_sum"), "{log}");
}

#[test]
fn partition_above_threshold_recovers_only_its_own_view() {
    let common = ["--clients", "14", "--decryptors", "7", "--threshold", "4", "--len", "4", "--dropout", "0"];
    let (code, log, _) = run(&[&["attack", "inconsistent-sets", "--split", "2"][..], &common].concat());
    assert_eq!(code, EXIT_OK, "{log}");
    assert!(log.contains("view A: 5 decryptors, keys recovered with same-view helpers: all"), "{log}");
    assert!(log.contains("view B: 2 decryptors, keys recovered with same-view helpers: none"), "{log}");
}

#[test]
fn join_reports_degenerate_level() {
    let common = ["--clients", "10", "--decryptors", "4", "--len", "4", "--iters", "1"];
    let (code, log, _) = run(&[&["join", "--new-clients", "2", "--new-decryptors", "2"][..], &common].concat());
    assert_eq!(code, EXIT_OK, "{log}");
    assert!(log.contains("0 bytes from existing decryptors"), "{log}");
    let (code, log, _) = run(&[&["join", "--new-decryptors", "2", "--level-threshold", "4"][..], &common].concat());
    assert_eq!(code, EXIT_CONFIG);
    assert!(log.contains("rejected"), "{log}");
}
