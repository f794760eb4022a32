mod support;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use typeloom::checker::{CheckError, CompileConfig};
use typeloom::metrics::{MigrationReport, PackageStatus};
use typeloom::pipeline::{run_pipeline, PipelineConfig, PipelineError, PredictionFormat, Stage};
use typeloom::project::{scan_package, Category};

use support::*;

fn config(work: &Path, stages: &[Stage], format: PredictionFormat) -> PipelineConfig {
    PipelineConfig {
        stages: stages.iter().copied().collect(),
        prediction_format: format,
        input_dir: fixtures().join("corpus"),
        work_dir: work.to_path_buf(),
        concurrency: 4,
        ..PipelineConfig::default()
    }
}

/// Every file below `dir`, relative path to contents.
fn tree(dir: &Path) -> HashMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            (
                e.path().strip_prefix(dir).unwrap().to_path_buf(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn package<'r>(report: &'r MigrationReport, name: &str) -> &'r typeloom::metrics::PackageRecord {
    report
        .packages
        .iter()
        .find(|p| p.name == name)
        .unwrap_or_else(|| panic!("{name} missing from the report"))
}

#[test]
fn rerunning_weave_reproduces_the_woven_tree() {
    let server = StubServer::start(scripted_completion);
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(
        dir.path(),
        &[Stage::Convert, Stage::PredictFim, Stage::Weave],
        PredictionFormat::Fim,
    );
    c.endpoint_url = Some(server.url.clone());
    run_pipeline(&c).unwrap();
    let woven = dir.path().join("woven");
    let before = tree(&woven);
    assert!(before.keys().any(|p| p.ends_with("index.ts")));

    fs::remove_dir_all(&woven).unwrap();
    let requests = server.requests.load(std::sync::atomic::Ordering::SeqCst);
    run_pipeline(&config(dir.path(), &[Stage::Weave], PredictionFormat::Fim)).unwrap();
    assert_eq!(tree(&woven), before);
    assert_eq!(
        server.requests.load(std::sync::atomic::Ordering::SeqCst),
        requests,
        "weave alone must not call the model"
    );
}

#[test]
fn fim_predictions_become_location_tables() {
    let server = StubServer::start(scripted_completion);
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(
        dir.path(),
        &[Stage::Convert, Stage::PredictFim, Stage::Weave],
        PredictionFormat::Fim,
    );
    c.endpoint_url = Some(server.url.clone());
    run_pipeline(&c).unwrap();

    let csv = fs::read_to_string(dir.path().join("predictions/decamelize/index.js.csv")).unwrap();
    assert!(csv.starts_with("file,line1,col1,line2,col2,t1,p1"), "{csv}");
    let woven = fs::read_to_string(dir.path().join("woven/decamelize/index.ts")).unwrap();
    assert!(
        woven.contains("(decamelized: string, separator: string) =>"),
        "{woven}"
    );
    assert!(
        woven.contains("decamelize(str: string, sep: string)"),
        "{woven}"
    );
    assert!(
        !woven.contains("y: number"),
        "hallucinated parameter leaked: {woven}"
    );

    // Converted packages are predicted on their module form.
    let converted = fs::read_to_string(dir.path().join("woven/left-pad/index.mts")).unwrap();
    assert!(converted.contains("export"), "{converted}");
}

#[test]
fn stages_compose_across_invocations() {
    let Some(compile) = compile_config() else {
        eprintln!("skipped: no TypeScript 4.x compiler");
        return;
    };
    let server = StubServer::start(scripted_completion);
    let scratch = tempfile::tempdir().unwrap();

    let mut whole = config(
        &scratch.path().join("whole"),
        &Stage::ALL,
        PredictionFormat::Fim,
    );
    whole.endpoint_url = Some(server.url.clone());
    whole.compile = compile.clone();
    run_pipeline(&whole).unwrap();

    let steps: [&[Stage]; 3] = [
        &[Stage::Convert, Stage::PredictFim],
        &[Stage::Weave],
        &[Stage::Check, Stage::Report],
    ];
    for stages in steps {
        let mut part = config(&scratch.path().join("parts"), stages, PredictionFormat::Fim);
        part.endpoint_url = Some(server.url.clone());
        part.compile = compile.clone();
        run_pipeline(&part).unwrap();
    }
    let read = |w: &str| fs::read(scratch.path().join(w).join("report/report.json")).unwrap();
    assert_eq!(read("whole"), read("parts"));
}

#[test]
fn external_location_predictions_reproduce_a_case_study() {
    let Some(compile) = compile_config() else {
        eprintln!("skipped: no TypeScript 4.x compiler");
        return;
    };
    let scratch = tempfile::tempdir().unwrap();
    let input = scratch.path().join("input");
    copy_dir(
        &fixtures().join("case_studies/decamelize"),
        &input.join("decamelize"),
    );

    let pkg = scan_package(&input.join("decamelize"), false).unwrap();
    let table = predictions_by_name(
        pkg.file("index.js").unwrap(),
        &[
            ("handlePreserveConsecutiveUppercase", "String"),
            ("decamelized", "string"),
            ("separator", "string"),
        ],
    );
    let predictions = scratch.path().join("predictions");
    fs::create_dir_all(predictions.join("decamelize")).unwrap();
    fs::write(predictions.join("decamelize/index.js.csv"), table.to_csv()).unwrap();

    let mut c = config(
        &scratch.path().join("work"),
        &[Stage::Weave, Stage::Check, Stage::Report],
        PredictionFormat::Location,
    );
    c.input_dir = input;
    c.predictions_dir = Some(predictions);
    c.compile = compile;
    let report = run_pipeline(&c).unwrap();
    let p = package(&report, "decamelize");
    assert_eq!(p.status, PackageStatus::Ok);
    assert!(!p.type_checks);
    assert_eq!(p.error_code_histogram.get("TS2322"), Some(&1));
    assert_eq!(p.error_code_histogram.get("TS2349"), Some(&1));
    assert_eq!(p.error_count, 2);
    assert_eq!(p.weave.sites_annotated, 3);
    // Annotations are only counted in error-free files.
    assert_eq!((p.error_free_files, p.total_annotations), (0, 0));
}

#[test]
fn an_unreachable_endpoint_fails_packages_not_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(
        dir.path(),
        &[
            Stage::Convert,
            Stage::PredictFim,
            Stage::Weave,
            Stage::Report,
        ],
        PredictionFormat::Fim,
    );
    c.endpoint_url = Some(unreachable_endpoint());
    let report = run_pipeline(&c).unwrap();
    assert_eq!(report.packages.len(), 10);
    for p in &report.packages {
        assert_eq!(p.status, PackageStatus::TranslateFailure, "{}", p.name);
        assert!(
            p.failure.as_deref().unwrap_or("").contains("predict-fim"),
            "{}: {:?}",
            p.name,
            p.failure
        );
    }
    assert_eq!(report.overall.translated, 0);
    assert_eq!(report.overall.type_check_rate(), None);
    assert!(dir.path().join("report/report.json").is_file());
    assert!(dir.path().join("predictions/decamelize.failed").is_file());
}

#[test]
fn configuration_errors_are_reported_before_work_starts() {
    let dir = tempfile::tempdir().unwrap();
    let mut no_endpoint = config(dir.path(), &[Stage::PredictFim], PredictionFormat::Fim);
    no_endpoint.fim.endpoint = String::new();
    assert!(matches!(
        run_pipeline(&no_endpoint),
        Err(PipelineError::Config(_))
    ));

    let wrong_format = config(dir.path(), &[Stage::PredictFim], PredictionFormat::Location);
    assert!(matches!(
        run_pipeline(&wrong_format),
        Err(PipelineError::Config(_))
    ));

    let mut woven_and_weave = config(
        dir.path(),
        &[Stage::Weave, Stage::Check],
        PredictionFormat::Location,
    );
    woven_and_weave.woven_dir = Some(dir.path().join("elsewhere"));
    assert!(matches!(
        run_pipeline(&woven_and_weave),
        Err(PipelineError::Config(_))
    ));

    let mut no_threads = config(dir.path(), &[Stage::Convert], PredictionFormat::Location);
    no_threads.concurrency = 0;
    assert!(matches!(
        run_pipeline(&no_threads),
        Err(PipelineError::Config(_))
    ));
    assert!(!dir.path().join("manifest.jsonl").exists());
}

#[test]
fn a_missing_compiler_stops_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(
        dir.path(),
        &[Stage::Weave, Stage::Check],
        PredictionFormat::Location,
    );
    c.compile = CompileConfig {
        compiler_path: dir.path().join("no-such-tsc"),
        ..CompileConfig::default()
    };
    assert!(matches!(
        run_pipeline(&c),
        Err(PipelineError::Compiler(CheckError::CompilerNotFound(_)))
    ));
}

#[cfg(unix)]
#[test]
fn a_slow_compiler_marks_packages_as_timed_out() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let tsc = dir.path().join("slow-tsc");
    fs::write(&tsc, "#!/bin/sh\nif [ \"$1\" = \"--version\" ]; then echo 'Version 4.9.3'; exit 0; fi\nsleep 20\n").unwrap();
    fs::set_permissions(&tsc, fs::Permissions::from_mode(0o755)).unwrap();

    let input = dir.path().join("input");
    copy_dir(&fixtures().join("corpus/left-pad"), &input.join("left-pad"));
    let mut c = config(
        &dir.path().join("work"),
        &[Stage::Weave, Stage::Check, Stage::Report],
        PredictionFormat::Location,
    );
    c.input_dir = input;
    c.compile = CompileConfig {
        compiler_path: tsc,
        timeout_secs: 1,
        ..CompileConfig::default()
    };
    let start = std::time::Instant::now();
    let report = run_pipeline(&c).unwrap();
    assert!(start.elapsed().as_secs() < 15);
    let p = package(&report, "left-pad");
    assert_eq!(p.status, PackageStatus::Timeout);
    assert_eq!(report.overall.translated, 0);
}

#[test]
fn manifest_classifies_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(
        dir.path(),
        &[Stage::Convert],
        PredictionFormat::Location,
    ))
    .unwrap();
    let manifest = fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = manifest
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 10);
    let category = |name: &str| {
        let r = records
            .iter()
            .find(|r| r["name"] == name)
            .unwrap_or_else(|| panic!("{name}: {manifest}"));
        serde_json::from_value::<Category>(r["category"].clone()).unwrap()
    };
    assert_eq!(category("ieee754"), Category::DefinitelyTypedNoDeps);
    assert_eq!(category("odd-range"), Category::DefinitelyTypedWithDeps);
    assert_eq!(category("left-pad"), Category::NeverTypedNoDeps);
    assert_eq!(category("is-even"), Category::NeverTypedWithDeps);
    assert_eq!(category("@gar/promisify"), Category::NeverTypedNoDeps);
}
