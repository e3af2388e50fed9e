use std::path::Path;
use std::process::{Command, Output};

fn frictionlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frictionlab"))
        .current_dir(dir)
        .env_remove("FRICTIONLAB_CONFIG_DIR")
        .env_remove("SOURCE_DATE_EPOCH")
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn version_names_config_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frictionlab(tmp.path(), &["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("frictionlab "));
    assert!(text.contains("default-config sha256:"));
}

#[test]
fn builtin_lexicon_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frictionlab(tmp.path(), &["validate"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("60 concepts"));
}

#[test]
fn broken_lexicon_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("lex.txt"), "[concept a]\ncanonical = x\n").unwrap();
    let out = frictionlab(tmp.path(), &["validate", "--lexicon", "lex.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "seed = 1\n").unwrap();
    let out = frictionlab(tmp.path(), &["--config", "c.toml", "report"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_writes_one_record_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let out = frictionlab(tmp.path(), &["--out-dir", "o", "generate"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(tmp.path().join("o/corpus.jsonl")).unwrap();
    let pairs = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["record"] == "pair")
        .count();
    assert_eq!(pairs, 1000);

    let out = frictionlab(
        tmp.path(),
        &["--out-dir", "o", "screen", "--corpus", "o/corpus.jsonl"],
    );
    assert!(out.status.success());
    let decisions = std::fs::read_to_string(tmp.path().join("o/decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 1001);
}

#[test]
fn report_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = frictionlab(tmp.path(), &["--out-dir", "a", "--threads", "1", "report"]);
    let b = frictionlab(tmp.path(), &["--out-dir", "b", "--threads", "3", "report"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let fa = read_all(&tmp.path().join("a"));
    let fb = read_all(&tmp.path().join("b"));
    assert_eq!(fa.len(), 8);
    assert_eq!(fa, fb);

    let report: serde_json::Value =
        serde_json::from_slice(&fa.iter().find(|(n, _)| n == "report.json").unwrap().1).unwrap();
    assert!(report["header"]["timestamp"].is_null());
}

#[test]
fn timestamp_comes_from_source_date_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_frictionlab"))
        .current_dir(tmp.path())
        .env("SOURCE_DATE_EPOCH", "0")
        .args(["--out-dir", "o", "--seed", "3", "report"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["header"]["timestamp"], "1970-01-01T00:00:00Z");
    assert_eq!(report["header"]["seed"], 3);
}

#[test]
fn config_dir_env_is_used() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = frictionlab::RunConfig::default_document().replace("seed = 7", "seed = 21");
    std::fs::write(tmp.path().join("default.toml"), doc).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_frictionlab"))
        .current_dir(tmp.path())
        .env("FRICTIONLAB_CONFIG_DIR", tmp.path())
        .args(["--out-dir", "o", "generate"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let header = std::fs::read_to_string(tmp.path().join("o/corpus.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(header.lines().next().unwrap()).unwrap();
    assert_eq!(first["seed"], 21);
}
