mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use support::*;

fn typeloom(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_typeloom"))
        .args(args.iter().map(|a| a.as_ref()))
        .env_remove("TYPELOOM_TSC")
        .output()
        .expect("the binary runs")
}

fn stdout_ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn jsonl(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}")))
        .collect()
}

#[test]
fn scan_lists_every_corpus_package() {
    let out = stdout_ok(typeloom(&[&"scan", &fixtures().join("corpus")]));
    let records = jsonl(&out);
    assert_eq!(records.len(), 10);
    assert!(records.iter().any(|r| r["name"] == "@gar/promisify"));
}

#[test]
fn convert_rewrites_the_running_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout_ok(typeloom(&[
        &"convert",
        &fixtures().join("corpus/running-example"),
        &dir.path(),
    ]));
    assert!(!jsonl(&out).is_empty());
    let a = fs::read_to_string(dir.path().join("a.mjs")).unwrap();
    assert!(a.contains("export"), "{a}");
    let b = fs::read_to_string(dir.path().join("b.mjs")).unwrap();
    assert!(b.contains("'./a.mjs'"), "{b}");
}

#[test]
fn weave_then_check_a_package() {
    let dir = tempfile::tempdir().unwrap();
    let pkg = fixtures().join("case_studies/array-unique");
    let preds = dir.path().join("preds");
    fs::create_dir_all(&preds).unwrap();
    fs::write(
        preds.join("index.js.csv"),
        "file,line1,col1,line2,col2,t1,p1\n",
    )
    .unwrap();

    let woven = dir.path().join("woven");
    stdout_ok(typeloom(&[
        &"weave",
        &"--format",
        &"location",
        &pkg,
        &preds,
        &woven,
    ]));
    assert!(woven.join("index.ts").is_file());

    let Some(tsc) = compiler() else {
        eprintln!("skipped check: no TypeScript 4.x compiler");
        return;
    };
    let out = stdout_ok(typeloom(&[&"check", &woven, &"--compiler", &tsc]));
    let result: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(result["diagnostics"].is_array(), "{out}");
}

#[test]
fn pipeline_and_report_agree() {
    let Some(tsc) = compiler() else {
        eprintln!("skipped: no TypeScript 4.x compiler");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input");
    copy_dir(&fixtures().join("corpus/left-pad"), &input.join("left-pad"));
    copy_dir(&fixtures().join("corpus/is-even"), &input.join("is-even"));
    let work = dir.path().join("work");

    let tables = stdout_ok(typeloom(&[
        &"pipeline",
        &"--input",
        &input,
        &"--work",
        &work,
        &"--stages",
        &"convert,weave,check,report",
        &"--compiler",
        &tsc,
    ]));
    assert!(tables.contains("Packages that type check"), "{tables}");
    let first = fs::read(work.join("report/report.json")).unwrap();

    let again = stdout_ok(typeloom(&[&"report", &"--input", &input, &"--work", &work]));
    assert_eq!(again, tables);
    assert_eq!(fs::read(work.join("report/report.json")).unwrap(), first);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let missing = Path::new("/nonexistent/typeloom-input");
    let out = typeloom(&[&"convert", &missing, &"/tmp/typeloom-never-written"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let out = typeloom(&[&"pipeline", &"--stages", &"nonsense"]);
    assert!(!out.status.success());
}
