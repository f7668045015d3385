//! Acceptance suite: one PASS/FAIL line per criterion, with runtimes against their budgets.
//!
//! Criteria 1 to 9 run in-process. Criterion 10 runs `verify-all --deterministic` twice through the
//! binary, with different thread counts, and compares stdout and every artifact byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use levy_fbsde_cli::output::OutputDir;
use levy_fbsde_cli::suite::run_suite;

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("readable output dir") {
        let path = entry.expect("dir entry").path();
        if path.is_file() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, fs::read(&path).expect("readable artifact"));
        }
    }
    files
}

fn verify_all(out: &Path, threads: &str) -> (Vec<u8>, BTreeMap<String, Vec<u8>>) {
    let output = Command::new(env!("CARGO_BIN_EXE_levy-fbsde"))
        .args(["verify-all", "--deterministic", "--threads", threads, "--out"])
        .arg(out)
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "verify-all failed:\n{}", String::from_utf8_lossy(&output.stderr));
    (output.stdout, snapshot(out))
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = OutputDir::create(&tmp.path().join("in-process"), true).unwrap();
    let criteria = run_suite(&out).expect("suite runs");

    let mut all_passed = true;
    for c in &criteria {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {} {} ({:.2} s, budget {} s)",
            c.id,
            c.title,
            c.elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        for check in c.checks.iter().filter(|check| !check.passed) {
            println!("        {check}");
        }
        all_passed &= c.passed();
    }

    let start = Instant::now();
    let (stdout_a, files_a) = verify_all(&tmp.path().join("run-a"), "1");
    let (stdout_b, files_b) = verify_all(&tmp.path().join("run-b"), "4");
    let in_process = snapshot(out.root());
    let mut differing: Vec<&String> = files_a
        .iter()
        .filter(|(name, bytes)| files_b.get(*name) != Some(*bytes))
        .map(|(name, _)| name)
        .collect();
    differing.extend(
        in_process
            .iter()
            .filter(|(name, bytes)| files_a.get(*name) != Some(*bytes))
            .map(|(name, _)| name),
    );
    let identical = stdout_a == stdout_b && files_a.len() == files_b.len() && differing.is_empty();
    let tag = if identical { "PASS" } else { "FAIL" };
    println!(
        "[{tag}] criterion 10 deterministic reruns are byte-identical ({} files, {:.2} s)",
        files_a.len(),
        start.elapsed().as_secs_f64()
    );
    if !differing.is_empty() {
        println!("        differing files: {differing:?}");
    }
    all_passed &= identical;

    assert!(all_passed, "acceptance criteria failed, see the lines above");
}
