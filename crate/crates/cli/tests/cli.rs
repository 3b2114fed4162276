use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qassert_core::TestReport;

fn suites_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites")
}

fn qassert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qassert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn example() -> String {
    suites_dir().join("bell_example.json").display().to_string()
}

#[test]
fn example_suite_prints_six_lines_and_fails() {
    let out = qassert(&["run", &example()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    for (line, passed) in lines.iter().zip([true, true, true, false, false, false]) {
        let tag = if passed { "[PASSED]: with a " } else { "[FAILED]: with a " };
        assert!(line.starts_with(tag) && line.ends_with(" probability of passing."), "{line}");
    }
}

#[test]
fn json_report_has_same_verdicts() {
    let text = qassert(&["run", &example()]);
    let json = qassert(&["run", &example(), "--format", "json"]);
    assert_eq!(json.status.code(), Some(1));
    let report: TestReport = serde_json::from_slice(&json.stdout).unwrap();
    let verdicts: Vec<bool> = report.results().map(|r| r.passed).collect();
    let from_text: Vec<bool> = String::from_utf8(text.stdout)
        .unwrap()
        .lines()
        .map(|l| l.starts_with("[PASSED]"))
        .collect();
    assert_eq!(verdicts, from_text);
}

#[test]
fn missing_file_exits_2() {
    let out = qassert(&["run", "/nonexistent/suite.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/suite.json"));
}

#[test]
fn malformed_suite_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"n_qubits\": \"two\"\n}").unwrap();
    let out = qassert(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn passing_suite_exits_0_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ok.json");
    std::fs::write(
        &path,
        r#"{"name": "ok", "n_qubits": 1,
            "cases": [{"name": "flip", "circuit": [{"gate": "x", "qubits": [0]}],
                       "assertions": [{"type": "distribution", "value": [0, 1]},
                                      {"type": "process_ref", "value": [{"gate": "x", "qubits": [0]}]}]}]}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(qassert(&["run", p]).status.code(), Some(0));
    assert_eq!(qassert(&["run", p, "--shots", "0"]).status.code(), Some(2));
    assert_eq!(qassert(&["run", p, "--threshold", "1.5"]).status.code(), Some(2));
    assert_eq!(qassert(&["run", p, "--noise", "loud"]).status.code(), Some(2));
    let strict = qassert(&["run", p, "--threshold", "1.0", "--noise", "default"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn save_data_writes_artifacts_without_changing_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let plain = qassert(&["run", &example()]);
    let saved = qassert(&["run", &example(), "--save-data", data.to_str().unwrap()]);
    assert_eq!(plain.stdout, saved.stdout);
    let mut files: Vec<String> = std::fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(
        files,
        ["report.json", "test_1.0.json", "test_1.1.json", "test_1.2.json", "test_2.0.json", "test_2.1.json", "test_2.2.json"]
    );
    let report: TestReport = serde_json::from_slice(&std::fs::read(data.join("report.json")).unwrap()).unwrap();
    assert!(report.cases.iter().flat_map(|c| &c.assertions).all(|a| a.artifact.is_some()));
}

#[test]
fn sweep_csv_and_mismatched_types() {
    let sweep = suites_dir().join("sweep_proj.json");
    let out = qassert(&["sweep", sweep.to_str().unwrap(), "--trials", "2", "--timing"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("shots,alpha,beta,J"));
    assert_eq!(csv.lines().count(), 8);
    assert!(String::from_utf8_lossy(&out.stderr).contains("proj:"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.json");
    let text = std::fs::read_to_string(suites_dir().join("sweep_state.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["negative_case"]["assertions"][0] = serde_json::json!({"type": "distribution", "value": [0.5, 0, 0, 0.5]});
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = qassert(&["sweep", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different assertion types"));
}
