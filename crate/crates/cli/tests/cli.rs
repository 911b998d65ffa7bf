use std::path::PathBuf;
use std::process::Command;

fn quill() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quill"))
}

fn core_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

#[test]
fn validate_accepts_the_shipped_task_files() {
    for f in ["custom_multi_question.json", "poem_sentiment.json"] {
        let out = quill().arg("validate").arg(core_fixture(f)).output().unwrap();
        assert!(out.status.success(), "{f}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("valid:"));
    }
}

#[test]
fn validate_reports_violations_with_a_failing_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(core_fixture("poem_sentiment.json")).unwrap()).unwrap();
    doc["data"]["done"] = serde_json::json!([0]);
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = quill().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("length_mismatch"));

    let out = quill().args(["validate", "--interface", "nope"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prompt_prints_the_sample_prompt() {
    let out = quill().arg("prompt").arg("--exemplars").arg(core_fixture("prompt/ner_sample_exemplars.json")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(core_fixture("prompt/ner_sample_prompt.txt")).unwrap());
}

#[test]
fn prompt_selects_exemplars() {
    let out = quill()
        .arg("prompt")
        .arg("--exemplars")
        .arg(core_fixture("prompt/ner_sample_exemplars.json"))
        .args(["--n", "2", "--strategy", "similar", "--target", "Chan beat Meluawati"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("Given the sentence").count(), 3);
    assert!(text.contains("Chan beat Meluawati"));
}

#[test]
fn sim_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = quill()
        .args(["sim", "al_vs_random", "--synthetic", "400", "--seeds", "1", "--budget", "100", "--initial", "20"])
        .args(["--k", "40", "--test-size", "100", "--epochs", "1", "--alpha", "ner=2", "--agg", "min", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["least_confidence_wins"].is_u64());
    for f in ["rounds.csv", "timings.csv", "summary.json", "curve_chunk.svg", "curve_ner.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn sim_rejects_bad_flags() {
    let out = quill().args(["sim", "al_vs_random", "--alpha", "ner"]).output().unwrap();
    assert!(!out.status.success());
    let out = quill().args(["sim", "al_vs_random", "--noise", "2", "--seeds", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
