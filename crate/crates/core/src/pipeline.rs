//! The end-to-end migration pipeline over a corpus directory.
//!
//! Every stage reads and writes artifacts below the work directory, so any
//! stage can be rerun on its own:
//!
//! ```text
//! work/
//!   manifest.jsonl              admission record per package
//!   converted/<pkg>/            ESM copy of the package
//!   converted/<pkg>.convert.jsonl
//!   predictions/<pkg>/<file>.csv
//!   predictions/<pkg>.fim.jsonl
//!   woven/<pkg>/                TypeScript package
//!   woven/<pkg>.weave.jsonl
//!   checked/<pkg>/result.json   status, diagnostics, accuracy
//!   report/                     report.json, tables.txt, *.csv
//! ```
//!
//! A stage that fails for one package leaves `<stage>/<pkg>.failed` holding
//! the reason; later stages record that package as a translate failure.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::checker::{
    emit_declarations, type_check, typescript_inputs, CheckError, CheckResult, CompileConfig,
};
use crate::convert::convert_package;
use crate::fim::{annotate_parameters_via_fim, CompletionClient, FimConfig, HttpCompletionClient};
use crate::metrics::{
    compare_signatures, extract_signatures_from_files, trivial_annotation_counts, AccuracyCount,
    MigrationReport, PackageRecord, PackageStatus, WeaveTotals,
};
use crate::predictions::{load_location_predictions, load_token_predictions};
use crate::project::{
    admit_package, ground_truth_declarations, scan_package, strip_tests, Admission, Category,
    ManifestRecord, PackageUnit, DEFAULT_MAX_LINES,
};
use crate::source::SourceUnit;
use crate::weave::{weave_package, write_weave_log, FilePredictions, WeaveRecord};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Compiler(CheckError),
    #[error(transparent)]
    Weave(#[from] crate::weave::WeaveError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Convert,
    PredictFim,
    Weave,
    Check,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Convert,
        Stage::PredictFim,
        Stage::Weave,
        Stage::Check,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Convert => "convert",
            Stage::PredictFim => "predict-fim",
            Stage::Weave => "weave",
            Stage::Check => "check",
            Stage::Report => "report",
        }
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionFormat {
    /// One row per token, as produced by token-sequence models.
    Token,
    /// Rows keyed by identifier spans.
    #[default]
    Location,
    /// Predictions obtained from a fill-in-the-middle endpoint.
    Fim,
}

impl PredictionFormat {
    pub fn name(self) -> &'static str {
        match self {
            PredictionFormat::Token => "token",
            PredictionFormat::Location => "location",
            PredictionFormat::Fim => "fim",
        }
    }
}

impl FromStr for PredictionFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" => Ok(PredictionFormat::Token),
            "location" => Ok(PredictionFormat::Location),
            "fim" => Ok(PredictionFormat::Fim),
            _ => Err(format!("unknown prediction format `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct PipelineConfig {
    pub stages: BTreeSet<Stage>,
    pub prediction_format: PredictionFormat,
    pub input_dir: PathBuf,
    pub work_dir: PathBuf,
    /// External predictions, laid out as `<dir>/<pkg>/<file>.csv`; imported
    /// into the work directory by the weave stage.
    pub predictions_dir: Option<PathBuf>,
    /// Already-woven packages to check instead of `work/woven`.
    pub woven_dir: Option<PathBuf>,
    /// Ground-truth declarations, laid out as `<dir>/<package name>/*.d.ts`.
    pub declarations_dir: Option<PathBuf>,
    pub compile: CompileConfig,
    /// Overrides `fim.endpoint`; predict-fim needs one of the two.
    pub endpoint_url: Option<String>,
    pub fim: FimConfig,
    /// Packages processed at once, and so the compiler process cap.
    pub concurrency: usize,
    pub max_lines: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: Stage::ALL.into_iter().collect(),
            prediction_format: PredictionFormat::default(),
            input_dir: PathBuf::from("packages"),
            work_dir: PathBuf::from("work"),
            predictions_dir: None,
            woven_dir: None,
            declarations_dir: None,
            compile: CompileConfig::default(),
            endpoint_url: None,
            fim: FimConfig::default(),
            concurrency: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            max_lines: DEFAULT_MAX_LINES,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let has = |s| self.stages.contains(&s);
        if has(Stage::PredictFim) && self.prediction_format != PredictionFormat::Fim {
            return Err(PipelineError::Config(
                "predict-fim requires the fim prediction format".into(),
            ));
        }
        if has(Stage::PredictFim) && self.endpoint_url.is_none() && self.fim.endpoint.is_empty() {
            return Err(PipelineError::Config(
                "predict-fim requires an endpoint".into(),
            ));
        }
        if has(Stage::Weave) && has(Stage::Check) && self.woven_dir.is_some() {
            return Err(PipelineError::Config(
                "a pre-woven directory cannot be combined with the weave stage".into(),
            ));
        }
        if self.concurrency == 0 {
            return Err(PipelineError::Config(
                "concurrency must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn fim_config(&self) -> FimConfig {
        let mut fim = self.fim.clone();
        if let Some(url) = &self.endpoint_url {
            fim.endpoint = url.clone();
        }
        fim
    }

    pub fn work(&self) -> WorkDir {
        WorkDir::new(&self.work_dir).with_woven_dir(self.woven_dir.clone())
    }
}

/// Paths of every artifact in a work directory.
#[derive(Debug, Clone)]
pub struct WorkDir {
    pub root: PathBuf,
    woven_override: Option<PathBuf>,
}

impl WorkDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        WorkDir {
            root: root.into(),
            woven_override: None,
        }
    }
    /// Reads and writes woven packages in `dir` instead of `<root>/woven`.
    pub fn with_woven_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.woven_override = dir;
        self
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.jsonl")
    }
    pub fn converted(&self, id: &str) -> PathBuf {
        self.root.join("converted").join(id)
    }
    pub fn conversion_log(&self, id: &str) -> PathBuf {
        self.root
            .join("converted")
            .join(format!("{id}.convert.jsonl"))
    }
    pub fn predictions(&self, id: &str) -> PathBuf {
        self.root.join("predictions").join(id)
    }
    pub fn fim_log(&self, id: &str) -> PathBuf {
        self.root
            .join("predictions")
            .join(format!("{id}.fim.jsonl"))
    }
    fn woven_root(&self) -> PathBuf {
        self.woven_override
            .clone()
            .unwrap_or_else(|| self.root.join("woven"))
    }
    pub fn woven(&self, id: &str) -> PathBuf {
        self.woven_root().join(id)
    }
    pub fn weave_log(&self, id: &str) -> PathBuf {
        self.woven_root().join(format!("{id}.weave.jsonl"))
    }
    pub fn checked(&self, id: &str) -> PathBuf {
        self.root.join("checked").join(id)
    }
    pub fn check_result(&self, id: &str) -> PathBuf {
        self.checked(id).join("result.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    fn failure_marker(&self, stage: Stage, id: &str) -> PathBuf {
        let dir = match stage {
            Stage::Convert => self.root.join("converted"),
            Stage::PredictFim => self.root.join("predictions"),
            Stage::Weave => self.woven_root(),
            Stage::Check => self.root.join("checked"),
            Stage::Report => self.report(),
        };
        dir.join(format!("{id}.failed"))
    }

    /// The first recorded failure of a stage before checking.
    pub fn earlier_failure(&self, id: &str) -> Option<String> {
        [Stage::Convert, Stage::PredictFim, Stage::Weave]
            .into_iter()
            .find_map(|s| {
                fs::read_to_string(self.failure_marker(s, id))
                    .ok()
                    .map(|m| format!("{}: {}", s.name(), m.trim_end()))
            })
    }
}

/// A package of the corpus and its admission decision.
#[derive(Debug, Clone)]
pub struct ScannedPackage {
    /// Path of the package directory below the input directory, e.g.
    /// `decamelize` or `@gar/promisify`.
    pub id: String,
    pub package: Option<PackageUnit>,
    pub record: ManifestRecord,
}

impl ScannedPackage {
    pub fn admitted(&self) -> Option<&PackageUnit> {
        self.package.as_ref().filter(|_| self.record.admitted)
    }
}

/// Package directories below `input_dir`, sorted. A directory whose name
/// starts with `@` is a scope holding packages.
pub fn discover_packages(input_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(input_dir).map_err(io_err(input_dir))? {
        let entry = entry.map_err(io_err(input_dir))?;
        if !entry.path().is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        if name.starts_with('@') {
            for inner in fs::read_dir(entry.path()).map_err(io_err(&entry.path()))? {
                let inner = inner.map_err(io_err(&entry.path()))?;
                if inner.path().is_dir() {
                    ids.push(format!("{name}/{}", inner.file_name().to_string_lossy()));
                }
            }
        } else {
            ids.push(name);
        }
    }
    ids.sort();
    Ok(ids)
}

/// Scans one package: test files removed, category set from the
/// availability of ground-truth declarations.
pub fn scan_one(
    root: &Path,
    declarations_dir: Option<&Path>,
    max_lines: usize,
) -> Result<(PackageUnit, Admission), String> {
    let pkg = scan_package(root, false).map_err(|e| e.to_string())?;
    let has_declarations = !ground_truth_declarations(root, &pkg.name, declarations_dir).is_empty();
    let mut pkg = strip_tests(pkg);
    pkg.has_declarations = has_declarations;
    pkg.category = Category::classify(has_declarations, pkg.has_dependencies);
    let admission = admit_package(&pkg, max_lines);
    Ok((pkg, admission))
}

pub fn scan_corpus(config: &PipelineConfig) -> Result<Vec<ScannedPackage>, PipelineError> {
    let ids = discover_packages(&config.input_dir)?;
    let scanned = ids
        .into_iter()
        .map(|id| {
            let root = config.input_dir.join(&id);
            match scan_one(&root, config.declarations_dir.as_deref(), config.max_lines) {
                Ok((pkg, admission)) => {
                    let record = ManifestRecord::new(&pkg, &admission);
                    ScannedPackage {
                        id,
                        package: Some(pkg),
                        record,
                    }
                }
                Err(reason) => ScannedPackage {
                    record: ManifestRecord {
                        name: id.clone(),
                        category: Category::NeverTypedNoDeps,
                        files: 0,
                        lines: 0,
                        admitted: false,
                        reason: Some(reason),
                    },
                    id,
                    package: None,
                },
            }
        })
        .collect();
    Ok(scanned)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_manifest(path: &Path, scanned: &[ScannedPackage]) -> Result<(), PipelineError> {
    let records: Vec<&ManifestRecord> = scanned.iter().map(|s| &s.record).collect();
    write_jsonl(path, &records)
}

fn remove_path(path: &Path) -> Result<(), PipelineError> {
    let result = if path.is_dir() {
        fs::remove_dir_all(path)
    } else {
        fs::remove_file(path)
    };
    match result {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(PipelineError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn record_failure(
    work: &WorkDir,
    stage: Stage,
    id: &str,
    reason: &str,
) -> Result<(), PipelineError> {
    let marker = work.failure_marker(stage, id);
    if let Some(parent) = marker.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&marker, reason).map_err(io_err(&marker))
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), PipelineError> {
    for entry in WalkDir::new(from).sort_by_file_name().follow_links(true) {
        let entry = entry.map_err(|e| PipelineError::Io {
            path: from.to_path_buf(),
            source: e.into(),
        })?;
        let rel = entry
            .path()
            .strip_prefix(from)
            .expect("walk stays below its root");
        let target = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target).map_err(io_err(&target))?;
        } else {
            fs::copy(entry.path(), &target).map_err(io_err(&target))?;
        }
    }
    Ok(())
}

/// Converts a package into `converted/<id>`.
pub fn convert_stage(work: &WorkDir, id: &str, pkg: &PackageUnit) -> Result<(), PipelineError> {
    let out = work.converted(id);
    remove_path(&out)?;
    remove_path(&work.failure_marker(Stage::Convert, id))?;
    match convert_package(pkg, &out) {
        Ok(converted) => write_jsonl(&work.conversion_log(id), &converted.outcomes),
        Err(e) => record_failure(work, Stage::Convert, id, &e.to_string()),
    }
}

/// The package that predictions and weaving apply to: the converted copy
/// when one exists, otherwise the original.
pub fn weave_input(
    work: &WorkDir,
    id: &str,
    original: &PackageUnit,
) -> Result<PackageUnit, String> {
    let converted = work.converted(id);
    if !converted.is_dir() {
        return Ok(original.clone());
    }
    let mut pkg = strip_tests(
        scan_package(&converted, original.has_declarations).map_err(|e| e.to_string())?,
    );
    pkg.name = original.name.clone();
    pkg.category = original.category;
    Ok(pkg)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FimFileRecord {
    pub file: String,
    pub parameters: usize,
    pub annotated: usize,
    pub requests: usize,
}

/// Queries the endpoint for every parameter of a package and stores the
/// answers as location-keyed tables in `predictions/<id>`.
pub fn predict_fim_stage(
    work: &WorkDir,
    id: &str,
    original: &PackageUnit,
    client: &dyn CompletionClient,
    fim: &FimConfig,
) -> Result<(), PipelineError> {
    let dir = work.predictions(id);
    remove_path(&dir)?;
    remove_path(&work.fim_log(id))?;
    remove_path(&work.failure_marker(Stage::PredictFim, id))?;
    let pkg = match weave_input(work, id, original) {
        Ok(p) => p,
        Err(e) => return record_failure(work, Stage::PredictFim, id, &e),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut log = Vec::new();
    for unit in pkg.files.iter().filter(|f| f.parses()) {
        let outcome = match annotate_parameters_via_fim(unit, client, fim) {
            Ok(o) => o,
            Err(e) => return record_failure(work, Stage::PredictFim, id, &e.to_string()),
        };
        if let Some(error) = outcome.error {
            return record_failure(work, Stage::PredictFim, id, &error);
        }
        let path = dir.join(format!("{}.csv", unit.relative_path));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, outcome.location_table(&unit.relative_path).to_csv())
            .map_err(io_err(&path))?;
        log.push(FimFileRecord {
            file: unit.relative_path.clone(),
            parameters: outcome.parameters,
            annotated: outcome.annotations.len(),
            requests: outcome.requests,
        });
    }
    write_jsonl(&work.fim_log(id), &log)
}

fn load_package_predictions(
    dir: &Path,
    pkg: &PackageUnit,
    format: PredictionFormat,
) -> Result<HashMap<String, FilePredictions>, String> {
    let mut out = HashMap::new();
    for unit in &pkg.files {
        let rel = &unit.relative_path;
        let mut candidates = vec![dir.join(format!("{rel}.csv"))];
        if let Some(stem) = rel.strip_suffix(".mjs") {
            candidates.push(dir.join(format!("{stem}.js.csv")));
        }
        let Some(path) = candidates.into_iter().find(|p| p.is_file()) else {
            continue;
        };
        let table = match format {
            PredictionFormat::Token => {
                FilePredictions::Token(load_token_predictions(&path).map_err(|e| e.to_string())?)
            }
            PredictionFormat::Location | PredictionFormat::Fim => FilePredictions::Location(
                load_location_predictions(&path).map_err(|e| e.to_string())?,
            ),
        };
        out.insert(rel.clone(), table);
    }
    Ok(out)
}

/// Weaves `predictions/<id>` into the package, writing `woven/<id>` and its
/// weave log. External predictions are imported first.
pub fn weave_stage(
    work: &WorkDir,
    id: &str,
    original: &PackageUnit,
    format: PredictionFormat,
    external: Option<&Path>,
) -> Result<(), PipelineError> {
    let out = work.woven(id);
    remove_path(&out)?;
    remove_path(&work.weave_log(id))?;
    remove_path(&work.failure_marker(Stage::Weave, id))?;
    let pred_dir = work.predictions(id);
    if let Some(ext) = external.filter(|_| format != PredictionFormat::Fim) {
        remove_path(&pred_dir)?;
        let source = ext.join(id);
        if source.is_dir() {
            copy_tree(&source, &pred_dir)?;
        }
    }
    let pkg = match weave_input(work, id, original) {
        Ok(p) => p,
        Err(e) => return record_failure(work, Stage::Weave, id, &e),
    };
    let predictions = match load_package_predictions(&pred_dir, &pkg, format) {
        Ok(p) => p,
        Err(e) => return record_failure(work, Stage::Weave, id, &e),
    };
    match weave_package(&pkg, &predictions, &out) {
        Ok(woven) => Ok(write_weave_log(&work.weave_log(id), &woven.records)?),
        Err(e) => record_failure(work, Stage::Weave, id, &e.to_string()),
    }
}

/// What the check stage records for a package.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PackageCheck {
    pub status: PackageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyCount>,
}

impl PackageCheck {
    fn failed(status: PackageStatus, reason: impl Into<String>) -> Self {
        PackageCheck {
            status,
            failure: Some(reason.into()),
            check: None,
            accuracy: None,
        }
    }
}

fn declaration_files(dir: &Path) -> Vec<PathBuf> {
    WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .map(|e| e.into_path())
        .filter(|p| p.to_string_lossy().ends_with(".d.ts"))
        .collect()
}

/// Type checks a sandbox copy of `woven/<id>`, and for packages with ground
/// truth, compares emitted declarations with it. Only a missing compiler is
/// an error; every other problem is recorded in the result.
pub fn check_stage(
    work: &WorkDir,
    id: &str,
    original: &PackageUnit,
    compile: &CompileConfig,
    declarations_dir: Option<&Path>,
) -> Result<PackageCheck, PipelineError> {
    let checked = work.checked(id);
    remove_path(&checked)?;
    let result = check_package(work, id, original, compile, declarations_dir)?;
    let path = work.check_result(id);
    fs::create_dir_all(&checked).map_err(io_err(&checked))?;
    let json = serde_json::to_string_pretty(&result).expect("check results serialize");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(result)
}

fn check_package(
    work: &WorkDir,
    id: &str,
    original: &PackageUnit,
    compile: &CompileConfig,
    declarations_dir: Option<&Path>,
) -> Result<PackageCheck, PipelineError> {
    if let Some(reason) = work.earlier_failure(id) {
        return Ok(PackageCheck::failed(
            PackageStatus::TranslateFailure,
            reason,
        ));
    }
    let woven = work.woven(id);
    if !woven.is_dir() {
        return Ok(PackageCheck::failed(
            PackageStatus::TranslateFailure,
            "no woven output",
        ));
    }
    let sandbox = work.checked(id).join("sandbox");
    copy_tree(&woven, &sandbox)?;
    let check = match type_check(&sandbox, compile) {
        Ok(c) => c,
        Err(e @ CheckError::CompilerNotFound(_)) => return Err(PipelineError::Compiler(e)),
        Err(e @ CheckError::Timeout(_)) => {
            return Ok(PackageCheck::failed(PackageStatus::Timeout, e.to_string()))
        }
        Err(e) => {
            return Ok(PackageCheck::failed(
                PackageStatus::TranslateFailure,
                e.to_string(),
            ))
        }
    };
    let mut accuracy = None;
    if original.category.has_ground_truth() {
        let truth_files =
            ground_truth_declarations(&original.root_dir, &original.name, declarations_dir);
        let out = work.checked(id).join("declarations");
        if emit_declarations(&sandbox, compile, &out).is_ok() {
            let truth = extract_signatures_from_files(&truth_files);
            let generated = extract_signatures_from_files(&declaration_files(&out));
            accuracy = Some(compare_signatures(&truth, &generated));
        }
    }
    Ok(PackageCheck {
        status: PackageStatus::Ok,
        failure: None,
        check: Some(check),
        accuracy,
    })
}

fn read_weave_log(path: &Path) -> Vec<WeaveRecord> {
    fs::read_to_string(path)
        .map(|text| {
            text.lines()
                .filter_map(|l| serde_json::from_str(l).ok())
                .collect()
        })
        .unwrap_or_default()
}

fn woven_units(dir: &Path) -> Vec<SourceUnit> {
    typescript_inputs(dir)
        .into_iter()
        .filter_map(|rel| {
            fs::read_to_string(dir.join(&rel))
                .ok()
                .map(|text| SourceUnit::new(rel, text))
        })
        .collect()
}

/// The report record of one package, built from its artifacts on disk.
pub fn package_record(work: &WorkDir, id: &str, pkg: &PackageUnit) -> PackageRecord {
    let result: Option<PackageCheck> = fs::read_to_string(work.check_result(id))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok());
    let mut record = match &result {
        None => PackageRecord::failed(
            pkg.name.clone(),
            pkg.category,
            PackageStatus::TranslateFailure,
            work.earlier_failure(id)
                .unwrap_or_else(|| "not checked".into()),
        ),
        Some(r) => PackageRecord::failed(
            pkg.name.clone(),
            pkg.category,
            r.status,
            r.failure.clone().unwrap_or_default(),
        ),
    };
    record.source_files = pkg.files.len();
    record.lines = pkg.total_lines();
    let weave = read_weave_log(&work.weave_log(id));
    record.weave = WeaveTotals {
        sites_found: weave.iter().map(|r| r.sites_found).sum(),
        sites_annotated: weave.iter().map(|r| r.sites_annotated).sum(),
        unmatched: weave.iter().map(|r| r.unmatched).sum(),
        invalid_types: weave.iter().map(|r| r.invalid_types).sum(),
        reverted_files: weave.iter().filter(|r| r.reverted).count(),
    };
    let Some(PackageCheck {
        status: PackageStatus::Ok,
        check: Some(check),
        accuracy,
        ..
    }) = result
    else {
        return record;
    };
    let (trivial, total) =
        trivial_annotation_counts(&woven_units(&work.woven(id)), &check.diagnostics, true);
    record.failure = None;
    record.type_checks = check.type_checks;
    record.error_free_files = check.error_free_files;
    record.total_files = check.files_checked;
    record.trivial_annotations = trivial;
    record.total_annotations = total;
    record.error_count = check.diagnostics.len();
    record.error_code_histogram = check.code_counts();
    record.accuracy = accuracy;
    record
}

/// Builds the report from the artifacts of the admitted packages.
pub fn build_report(
    work: &WorkDir,
    scanned: &[ScannedPackage],
    prediction_source: &str,
) -> MigrationReport {
    let mut compiler_version = None;
    let records = scanned
        .iter()
        .filter_map(|s| s.admitted().map(|pkg| (s, pkg)))
        .map(|(s, pkg)| {
            if compiler_version.is_none() {
                compiler_version = fs::read_to_string(work.check_result(&s.id))
                    .ok()
                    .and_then(|t| serde_json::from_str::<PackageCheck>(&t).ok())
                    .and_then(|r| r.check)
                    .and_then(|c| c.compiler_version);
            }
            package_record(work, &s.id, pkg)
        })
        .collect();
    MigrationReport::new(prediction_source, compiler_version, records)
}

/// Runs the selected stages over every admitted package of the corpus.
///
/// Per-package problems are recorded and never stop the run; only I/O
/// errors in the work directory and a missing compiler do.
pub fn run_pipeline(config: &PipelineConfig) -> Result<MigrationReport, PipelineError> {
    run_pipeline_with(config, None)
}

/// Like [`run_pipeline`], with a caller-supplied completion client for the
/// predict-fim stage.
pub fn run_pipeline_with(
    config: &PipelineConfig,
    client: Option<&dyn CompletionClient>,
) -> Result<MigrationReport, PipelineError> {
    config.validate()?;
    let work = config.work();
    fs::create_dir_all(&work.root).map_err(io_err(&work.root))?;
    let scanned = scan_corpus(config)?;
    write_manifest(&work.manifest(), &scanned)?;
    let admitted: Vec<(&str, &PackageUnit)> = scanned
        .iter()
        .filter_map(|s| s.admitted().map(|p| (s.id.as_str(), p)))
        .collect();

    let fim = config.fim_config();
    let http;
    let client: &dyn CompletionClient = match client {
        Some(c) => c,
        None => {
            http = HttpCompletionClient::from_config(&fim);
            &http
        }
    };
    let has = |s| config.stages.contains(&s);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    pool.install(|| {
        admitted
            .par_iter()
            .try_for_each(|(id, pkg)| -> Result<(), PipelineError> {
                if has(Stage::Convert) {
                    convert_stage(&work, id, pkg)?;
                }
                if has(Stage::PredictFim) {
                    predict_fim_stage(&work, id, pkg, client, &fim)?;
                }
                if has(Stage::Weave) {
                    weave_stage(
                        &work,
                        id,
                        pkg,
                        config.prediction_format,
                        config.predictions_dir.as_deref(),
                    )?;
                }
                if has(Stage::Check) {
                    check_stage(
                        &work,
                        id,
                        pkg,
                        &config.compile,
                        config.declarations_dir.as_deref(),
                    )?;
                }
                Ok(())
            })
    })?;

    let report = build_report(&work, &scanned, config.prediction_format.name());
    if has(Stage::Report) {
        report.write_to(&work.report())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("lint".parse::<Stage>().is_err());
        assert_eq!(
            "token".parse::<PredictionFormat>().unwrap(),
            PredictionFormat::Token
        );
    }

    #[test]
    fn configuration_rules() {
        let mut c = PipelineConfig::default();
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
        c.prediction_format = PredictionFormat::Fim;
        c.validate().unwrap();
        c.stages = [Stage::Weave, Stage::Check].into_iter().collect();
        c.woven_dir = Some("w".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn scoped_packages_are_discovered() {
        let dir = tempfile::tempdir().unwrap();
        for p in ["b", "a", "@scope/x", ".hidden"] {
            fs::create_dir_all(dir.path().join(p)).unwrap();
        }
        assert_eq!(
            discover_packages(dir.path()).unwrap(),
            ["@scope/x", "a", "b"]
        );
    }

    #[test]
    fn failures_propagate_to_the_check_stage() {
        let dir = tempfile::tempdir().unwrap();
        let pkg_dir = dir.path().join("in/p");
        fs::create_dir_all(&pkg_dir).unwrap();
        fs::write(pkg_dir.join("index.js"), "var x = 1;\n").unwrap();
        let pkg = scan_package(&pkg_dir, false).unwrap();
        let work = WorkDir::new(dir.path().join("work"));
        record_failure(&work, Stage::PredictFim, "p", "endpoint unavailable").unwrap();
        let compile = CompileConfig {
            compiler_path: "/nonexistent/tsc".into(),
            ..CompileConfig::default()
        };
        let r = check_stage(&work, "p", &pkg, &compile, None).unwrap();
        assert_eq!(r.status, PackageStatus::TranslateFailure);
        let record = package_record(&work, "p", &pkg);
        assert_eq!(
            record.failure.as_deref(),
            Some("predict-fim: endpoint unavailable")
        );
        assert!(!record.translated());
    }
}
