use std::path::Path;
use std::process::{Command, Output};

use neuroloop::task::read_trials_jsonl;
use serde_json::Value;

fn neuroloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuroloop"))
        .args(args)
        .env("NEUROLOOP_LOG", "off")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn train_and_benchmark(dir: &Path, seed: &str) {
    let d = dir.to_str().unwrap();
    ok(&neuroloop(&["--out", d, "--seed", seed, "train"]));
    ok(&neuroloop(&["--out", d, "--seed", seed, "benchmark"]));
}

#[test]
fn train_writes_two_models_and_three_session_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&neuroloop(&["--out", tmp.path().to_str().unwrap(), "train"]));
    assert!(stdout.contains("wrote"), "{stdout}");

    let files = sorted_files(tmp.path());
    let models: Vec<_> = files.iter().filter(|f| f.starts_with("model_")).collect();
    let logs: Vec<_> = files.iter().filter(|f| f.starts_with("session_")).collect();
    assert_eq!(models, ["model_final.json", "model_intermediate.json"]);
    assert_eq!(
        logs,
        ["session_0_passive.jsonl", "session_1_passive.jsonl", "session_2_assisted.jsonl"]
    );

    for log in logs {
        let text = std::fs::read_to_string(tmp.path().join(log)).unwrap();
        assert_eq!(read_trials_jsonl(&text).unwrap().len(), 20);
    }

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("train_manifest.json")).unwrap()).unwrap();
    let sessions = manifest["sessions"].as_array().unwrap();
    assert_eq!(sessions.len(), 3);
    assert_eq!(sessions[2]["mode"], "assisted");
    assert_eq!(sessions[2]["p"], 0.5);
    assert_eq!(sessions[2]["decoder_model_path"], "model_intermediate.json");
    assert!(sessions[0]["decoder_model_path"].is_null());
}

#[test]
fn train_then_benchmark_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train_and_benchmark(a.path(), "7");
    train_and_benchmark(b.path(), "7");
    let files = sorted_files(a.path());
    assert_eq!(files, sorted_files(b.path()));
    for f in &files {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn different_seeds_give_different_logs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train_and_benchmark(a.path(), "1");
    train_and_benchmark(b.path(), "2");
    let x = std::fs::read(a.path().join("benchmark_neural.jsonl")).unwrap();
    let y = std::fs::read(b.path().join("benchmark_neural.jsonl")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn benchmark_summary_has_chance_level_and_per_direction_rows() {
    let tmp = tempfile::tempdir().unwrap();
    train_and_benchmark(tmp.path(), "3");
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 6);
    assert_eq!(summary["directions"].as_array().unwrap().len(), 3);
    let log10 = summary["chance"]["log10"].as_f64().unwrap();
    assert!((-54.9..=-54.7).contains(&log10), "{log10}");

    let hand = read_trials_jsonl(&std::fs::read_to_string(tmp.path().join("benchmark_hand.jsonl")).unwrap()).unwrap();
    let neural =
        read_trials_jsonl(&std::fs::read_to_string(tmp.path().join("benchmark_neural.jsonl")).unwrap()).unwrap();
    assert_eq!(hand.len(), 60);
    assert_eq!(neural.len(), 60);
    let hand_n: u64 = summary["groups"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|g| g["mode"] == "hand")
        .map(|g| g["n_trials"].as_u64().unwrap())
        .sum();
    assert_eq!(hand_n, 60);

    let csv = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("mode,direction,"));
}

#[test]
fn report_rebuilds_the_same_summary_from_logs() {
    let tmp = tempfile::tempdir().unwrap();
    train_and_benchmark(tmp.path(), "4");
    let before = std::fs::read(tmp.path().join("summary.json")).unwrap();
    std::fs::remove_file(tmp.path().join("summary.json")).unwrap();
    ok(&neuroloop(&["--out", tmp.path().to_str().unwrap(), "--seed", "4", "report"]));
    assert_eq!(std::fs::read(tmp.path().join("summary.json")).unwrap(), before);
}

#[test]
fn report_without_logs_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = neuroloop(&["--out", tmp.path().to_str().unwrap(), "report"]);
    assert!(!out.status.success());
}

#[test]
fn benchmark_without_model_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = neuroloop(&["--out", tmp.path().to_str().unwrap(), "benchmark"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn channel_mismatch_is_rejected_with_line_and_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"seed\": 3,\n  \"features\": {\"channels\": 32}\n}\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = neuroloop(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "train",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3"), "{err}");
    assert!(err.contains("features.channels"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn unknown_config_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.json");
    std::fs::write(&cfg, "{\"sede\": 3}").unwrap();
    let out = neuroloop(&["--config", cfg.to_str().unwrap(), "budget"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_seed_is_overridden_by_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, "{\"seed\": 99}").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&neuroloop(&["--config", cfg.to_str().unwrap(), "--seed", "5", "--out", a.to_str().unwrap(), "train"]));
    ok(&neuroloop(&["--seed", "5", "--out", b.to_str().unwrap(), "train"]));
    assert_eq!(
        std::fs::read(a.join("model_final.json")).unwrap(),
        std::fs::read(b.join("model_final.json")).unwrap()
    );
}

#[test]
fn budget_prints_reference_figures() {
    let stdout = ok(&neuroloop(&["budget"]));
    assert!(stdout.contains("24000000"), "{stdout}");
    assert!(stdout.contains("3000"), "{stdout}");
    assert!(stdout.contains("8000x"), "{stdout}");
    assert!(stdout.contains("4.71"), "{stdout}");
}

#[test]
fn budget_with_no_electrodes_reports_undefined_ratio() {
    let stdout = ok(&neuroloop(&["budget", "--electrodes", "0"]));
    assert!(stdout.contains("n/a"), "{stdout}");
}

#[test]
fn budget_rejects_negative_inputs() {
    let out = neuroloop(&["budget", "--fs", "-1"]);
    assert!(!out.status.success());
}

#[test]
fn log_level_env_var_enables_info_output() {
    let out = Command::new(env!("CARGO_BIN_EXE_neuroloop"))
        .args(["budget"])
        .env("NEUROLOOP_LOG", "debug")
        .output()
        .unwrap();
    assert!(out.status.success());
    let quiet = neuroloop(&["budget"]);
    assert!(quiet.stderr.is_empty());
}
