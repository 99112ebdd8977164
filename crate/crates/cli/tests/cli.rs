use std::path::PathBuf;
use std::process::{Command, Output};

fn patch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patch"))
        .args(args)
        .env("PATCH_WORKDIR", std::env::temp_dir().join("patch-cli-tests"))
        .output()
        .expect("run patch")
}

fn bubble_sort() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/programs/bubble_sort.patch.json")
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DUPLICATE_LABELS: &str = r#"{
  "formatVersion": 1,
  "entry": "main",
  "modules": [{
    "name": "main",
    "inputs": [{"name": "n", "type": "integer", "binding": "caller"}],
    "outputs": [],
    "steps": [
      {"id": "m", "kind": "module", "payload": {}, "next": null, "children": [{"group": "body", "step": "1"}]},
      {"id": "1", "kind": "labeled", "payload": {"scrutinee": "n"}, "next": null,
       "children": [{"group": "case", "label": "1", "step": "2"}, {"group": "case", "label": "1", "step": "3"}]},
      {"id": "2", "kind": "display", "payload": {"expr": "1"}, "next": null, "children": []},
      {"id": "3", "kind": "display", "payload": {"expr": "2"}, "next": null, "children": []}
    ]
  }]
}"#;

#[test]
fn check_reference_document() {
    let o = patch(&["check", &bubble_sort()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).is_empty());
}

#[test]
fn check_reports_duplicate_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.patch.json");
    std::fs::write(&path, DUPLICATE_LABELS).unwrap();
    let o = patch(&["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with("step=1 rule=label-unique msg="), "{err}");
}

#[test]
fn check_missing_file() {
    let o = patch(&["check", "/definitely/not/here.patch.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error kind=io-error"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn run_sorts_the_example_list() {
    let o = patch(&["run", &bubble_sort(), "--in", "list=[29, -4, 2, 17, 45, 9]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "[-4, 2, 9, 17, 29, 45]\n");
    let o = patch(&["run", &bubble_sort(), "--in", "list=[]"]);
    assert_eq!(stdout(&o), "[]\n");
}

#[test]
fn run_json() {
    let o = patch(&["run", &bubble_sort(), "--in", "list=[2, 1]", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["outputs"]["list"]["value"], "[1, 2]");
    assert_eq!(v["outputs"]["list"]["type"], "list(integer)");
    assert_eq!(v["stopped"], true);
    assert!(v["error"].is_null());
}

#[test]
fn run_with_unresolvable_inputs() {
    let o = patch(&["run", &bubble_sort(), "--in", "count=3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error kind=resolution-failed"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn trace_prints_one_event_per_line() {
    let o = patch(&["trace", &bubble_sort(), "--in", "list=[2, 1]"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let events: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events[0]["kind"], "enter");
    for (k, e) in events.iter().enumerate() {
        assert_eq!(e["seq"], k as u64 + 1);
    }
    assert!(events.iter().any(|e| e["kind"] == "swap"), "{text}");
}

#[test]
fn emit_writes_source_and_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let o = patch(&["emit", &bubble_sort(), "--dialect", "cxx", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let main = std::fs::read_to_string(dir.path().join("main.cpp")).unwrap();
    assert!(main.contains("int main()"));
    assert!(main.contains("m_bubblesort"));
    assert!(dir.path().join("patch_runtime.hpp").exists());

    let o = patch(&["emit", &bubble_sort(), "--dialect", "fortran"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error kind=unknown-dialect"));
}

#[test]
fn diff_is_reproducible() {
    let first = patch(&["diff", &bubble_sort(), "--dialect", "py3", "--trials", "20", "--seed", "7", "--allow-skip"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    if stderr(&first).starts_with("skipped") {
        eprintln!("python3 unavailable; skipping");
        return;
    }
    let again = patch(&["diff", &bubble_sort(), "--dialect", "py3", "--trials", "20", "--seed", "7"]);
    assert_eq!(stdout(&first), stdout(&again));
    assert_eq!(stdout(&first).lines().last(), Some("agree=20/20"));
    assert_eq!(stdout(&first).lines().count(), 21);
}

#[test]
fn diff_without_toolchain() {
    let o = Command::new(env!("CARGO_BIN_EXE_patch"))
        .args(["diff", &bubble_sort(), "--dialect", "cxx", "--trials", "3"])
        .env("PATH", "/nonexistent")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error kind=toolchain-missing"));
    let o = Command::new(env!("CARGO_BIN_EXE_patch"))
        .args(["diff", &bubble_sort(), "--dialect", "cxx", "--allow-skip"])
        .env("PATH", "/nonexistent")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
}
