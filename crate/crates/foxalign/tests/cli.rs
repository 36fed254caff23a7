//! End-to-end exercises of the `foxalign` binary: exit-code contract,
//! seed determinism, and the synth -> train-toy -> parse -> eval file flow.

use std::path::Path;
use std::process::{Command, Output};

fn foxalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foxalign"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (signal?)")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn gradcheck_passes_and_reports_error_bound() {
    let out = foxalign(&["gradcheck", "--trials", "10", "--seed", "7"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("max relative error"));
}

#[test]
fn gradcheck_corrupted_gradient_fails_with_exit_1() {
    let out = foxalign(&[
        "gradcheck",
        "--trials",
        "3",
        "--seed",
        "7",
        "--corrupt-gradient",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn gradcheck_zero_trials_is_usage_error() {
    let out = foxalign(&["gradcheck", "--trials", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = foxalign(&["gradcheck", "--no-such-flag"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_input_file_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = foxalign(&[
        "train-toy",
        "--mask",
        dir.path().join("absent.fxt1").to_str().unwrap(),
        "--out",
        dir.path().join("emb.fxt1").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

fn synth_into(dir: &Path, seed: &str) {
    let out = foxalign(&[
        "synth",
        "--faces",
        "3",
        "--seed",
        seed,
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let root = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        root.path().join("a"),
        root.path().join("b"),
        root.path().join("c"),
    );
    synth_into(&a, "11");
    synth_into(&b, "11");
    synth_into(&c, "12");
    for name in ["heatmap.fxt1", "mask.fxt1", "annotation.json"] {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        let bytes_b = std::fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs for identical seeds");
    }
    assert_ne!(
        std::fs::read(a.join("heatmap.fxt1")).unwrap(),
        std::fs::read(c.join("heatmap.fxt1")).unwrap(),
        "heatmap identical across different seeds"
    );
}

#[test]
fn synth_train_parse_eval_flow() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    synth_into(dir.path(), "23");

    // Rate and margin that actually collapse each face's pixels within the
    // default step budget; see the parse tests in the library for why the
    // defaults stay too diffuse.
    let out = foxalign(&[
        "train-toy",
        "--mask",
        &p("mask.fxt1"),
        "--learning-rate",
        "5.0",
        "--delta-v",
        "0.05",
        "--seed",
        "23",
        "--out",
        &p("emb.fxt1"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("l_fox"));

    let out = foxalign(&[
        "parse",
        "--heatmap",
        &p("heatmap.fxt1"),
        "--embeddings",
        &p("emb.fxt1"),
        "--bandwidth",
        "0.5",
        "--out",
        &p("groups.json"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let out = foxalign(&[
        "eval",
        "--pred",
        &p("groups.json"),
        "--annotation",
        &p("annotation.json"),
        "--out",
        &p("report.json"),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let f1 = report["f1"].as_f64().expect("f1 missing from report");
    assert!((0.0..=1.0).contains(&f1), "f1 out of range: {f1}");
    assert!(report["nme_percent"].is_f64(), "nme_percent missing");
}

#[test]
fn print_config_dumps_json_without_running() {
    let out = foxalign(&["bench", "--print-config"]);
    assert_eq!(code(&out), 0);
    let cfg: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(cfg["face_counts"].is_array());
}
