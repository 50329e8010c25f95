use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
  "name": "small",
  "solver": {"M": 128},
  "words": ["a", "ab", "bC"],
  "experiments": {"linearization": {"classes": 2, "epsilons": [1e-1, 3e-2, 1e-2]}}
}"#;

fn maglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maglab"))
        .args(args)
        .env_remove("MAGLAB_JOBS")
        .output()
        .unwrap()
}

fn small_config(dir: &TempDir) -> String {
    let p = dir.path().join("small.json");
    std::fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn spectrum_writes_json_with_metadata() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let out = dir.path().join("spectrum.json");
    let o = maglab(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(v["metadata"]["system"], "small");
    let entries = v["result"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(entries[1]["word"], "ab");
    assert!(entries[0]["action"].as_f64().unwrap() > 3.0);
}

#[test]
fn words_file_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let words = dir.path().join("words.txt");
    std::fs::write(&words, "# two classes\nc\ncd  # trailing comment\n").unwrap();
    let o = maglab(&["spectrum", "--config", &cfg, "--words", words.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[0].starts_with("word,action,length,period"));
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("cd,"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let one = maglab(&["spectrum", "--config", &cfg, "--jobs", "1"]);
    let three = maglab(&["spectrum", "--config", &cfg, "--jobs", "3"]);
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn linearization_experiment_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let o = maglab(&["experiment", "linearization", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let slope = v["result"]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn orbit_command_reports_one_orbit() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(&dir);
    let o = maglab(&["orbit", "--word", "abAB", "--config", &cfg]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["word"], "abAB");
}

#[test]
fn bad_input_exits_nonzero_with_a_message() {
    let o = maglab(&["spectrum", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));

    let o = maglab(&["spectrum", "--config", "/nonexistent/sys.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/sys.json"));

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"surface": {"genus": 3}}"#).unwrap();
    let o = maglab(&["orbit", "--word", "a", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = maglab(&["orbit", "--word", "aA"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let o = maglab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("experiment"));
}
