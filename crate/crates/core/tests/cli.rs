use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deconflict")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn built_in_cultures_validate() {
    let o = cli(&["validate", "--level", "easy"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("PASS"));

    let o = cli(&["validate", "--level", "medium", "--json"]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(report.is_object());
}

#[test]
fn a_cyclic_culture_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cycle.culture");
    std::fs::write(
        &path,
        "culture \"cycle\"\nproperty r : int 1..3\nproposition mu \"go\"\n\
         rule up \"higher\" when self.r > other.r\nrule down \"lower\" when self.r < other.r\n\
         attack up -> mu\nattack down -> mu\n",
    )
    .unwrap();
    let o = cli(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(&path, "culture \"x\"\nproposition mu \"m\"\nattack mu -> nowhere\n").unwrap();
    let o = cli(&["validate", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'), "error should name line 3");
}

#[test]
fn zero_runs_print_only_the_header() {
    let o = cli(&["run", "--level", "easy", "--count", "0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("level"));
}

fn only_log(dir: &Path) -> std::path::PathBuf {
    let logs: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(logs.len(), 1, "{logs:?}");
    logs[0].clone()
}

#[test]
fn runs_write_replays_that_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        cli(&["run", "--level", "hard", "--mode", "X", "--seed", "4", "--replay-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = only_log(dir.path());

    let ok = cli(&["replay", log.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let text = std::fs::read_to_string(&log).unwrap();
    let tampered = text.replacen("\"fuel\":", "\"fuel\":1", 1);
    assert_ne!(tampered, text);
    std::fs::write(&log, tampered).unwrap();
    let bad = cli(&["replay", log.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn explain_names_the_winning_reason() {
    let o = cli(&["explain", "--level", "easy", "--self", "rank=2,tasked=true", "--other", "rank=4,tasked=false"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("winner: proponent"), "{out}");
    assert!(out.contains("(p,{b}) (o,{a})"), "{out}");
    assert!(out.contains("You have right of way"), "{out}");

    let bad = cli(&["explain", "--level", "easy", "--self", "rank=9", "--other", "rank=1,tasked=false"]);
    assert_eq!(bad.status.code(), Some(2));
}
