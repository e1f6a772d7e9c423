use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/biomed").join(name)
}

fn run(data: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_facetlit"))
        .arg("assess")
        .arg("--idea-file")
        .arg(fixture("idea.txt"))
        .arg("--backend-fixture")
        .arg(fixture("backend.json"))
        .arg("--mock-script")
        .arg(fixture("mock_script.json"))
        .arg("--data-dir")
        .arg(data)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn batch_assess_is_repeatable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--select", "claimhops", "--select", "healthver", "--select", "scifact"];
    let first = run(a.path(), &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(b.path(), &args);
    assert_eq!(first.stdout, second.stdout);

    let report = String::from_utf8(first.stdout).unwrap();
    assert!(report.starts_with("# Idea assessment report"));
    assert!(report.contains("conceptually novel"));
    let stderr = String::from_utf8_lossy(&first.stderr);
    assert!(stderr.contains("evaluation: missing from the idea"), "{stderr}");
}

#[test]
fn report_file_written_and_bad_selection_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("report.md");
    let ok = run(&tmp.path().join("data"), &["--out", out.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(ok.stdout.is_empty());
    assert!(std::fs::read_to_string(&out).unwrap().contains("## Corpus"));

    let bad = run(&tmp.path().join("data2"), &["--select", "no-such-paper"]);
    assert!(!bad.status.success());
}
