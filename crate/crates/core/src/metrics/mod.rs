//! Migration metrics and the migration report.

mod signatures;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use signatures::{
    compare_signatures, extract_signatures, extract_signatures_from_files, normalize_type_text,
    AccuracyCount, SignatureRecord,
};

use crate::checker::{CheckResult, Diagnostic};
use crate::project::Category;
use crate::source::SourceUnit;
use crate::weave::present_annotations;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Annotations that type check easily but carry little information.
pub const TRIVIAL_TYPES: [&str; 3] = ["any", "any[]", "Function"];

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("reports cover different packages: only before {before:?}, only after {after:?}")]
    PackageSetMismatch {
        before: Vec<String>,
        after: Vec<String>,
    },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// (trivial, total) annotation counts over woven files, optionally only those
/// without diagnostics.
pub fn trivial_annotation_counts(
    files: &[SourceUnit],
    diagnostics: &[Diagnostic],
    error_free_only: bool,
) -> (usize, usize) {
    let bad: BTreeSet<&str> = diagnostics
        .iter()
        .filter_map(|d| d.file.as_deref())
        .collect();
    let mut trivial = 0;
    let mut total = 0;
    for f in files {
        if error_free_only && bad.contains(f.relative_path.as_str()) {
            continue;
        }
        let Ok(annotations) = present_annotations(f) else {
            continue;
        };
        for a in annotations {
            total += 1;
            if TRIVIAL_TYPES.contains(&a.type_text.trim()) {
                trivial += 1;
            }
        }
    }
    (trivial, total)
}

/// Share of annotations that are `any`, `any[]` or `Function`; absent when
/// there are no annotations.
pub fn trivial_annotation_ratio(
    files: &[SourceUnit],
    check: &CheckResult,
    error_free_only: bool,
) -> Option<f64> {
    let (trivial, total) = trivial_annotation_counts(files, &check.diagnostics, error_free_only);
    (total > 0).then(|| trivial as f64 / total as f64)
}

/// Diagnostic counts by error code across packages.
pub fn error_code_histogram<'r>(
    results: impl IntoIterator<Item = &'r CheckResult>,
) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for r in results {
        for d in &r.diagnostics {
            *h.entry(d.code.clone()).or_default() += 1;
        }
    }
    h
}

/// The `n` most frequent codes (ties broken by code) and the remaining total.
pub fn top_codes(histogram: &BTreeMap<String, usize>, n: usize) -> (Vec<(String, usize)>, usize) {
    let mut all: Vec<(String, usize)> = histogram.iter().map(|(c, k)| (c.clone(), *k)).collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let other = all.iter().skip(n).map(|(_, k)| k).sum();
    all.truncate(n);
    (all, other)
}

/// Message templates of the most common codes, as printed by the compiler.
pub fn code_message(code: &str) -> &'static str {
    match code {
        "TS2339" => "Property '{0}' does not exist on type '{1}'.",
        "TS2322" => "Type '{0}' is not assignable to type '{1}'.",
        "TS2345" => "Argument of type '{0}' is not assignable to parameter of type '{1}'.",
        "TS2304" => "Cannot find name '{0}'.",
        "TS2554" => "Expected {0} arguments, but got {1}.",
        "TS2349" => "This expression is not callable.",
        "TS2367" => "This condition will always return '{0}' since the types '{1}' and '{2}' have no overlap.",
        "TS2307" => "Cannot find module '{0}' or its corresponding type declarations.",
        "TS2551" => "Property '{0}' does not exist on type '{1}'. Did you mean '{2}'?",
        "TS2314" => "Generic type '{0}' requires {1} type argument(s).",
        _ => "",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub errors: usize,
    /// Proportion of packages with at most `errors` errors.
    pub proportion: f64,
}

/// Step points of the empirical distribution of `counts`.
pub fn ecdf_of_counts(counts: &[usize]) -> Vec<EcdfPoint> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut points: Vec<EcdfPoint> = Vec::new();
    for (i, c) in sorted.iter().enumerate() {
        let proportion = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(p) if p.errors == *c => p.proportion = proportion,
            _ => points.push(EcdfPoint {
                errors: *c,
                proportion,
            }),
        }
    }
    points
}

pub fn error_ecdf(results: &[CheckResult]) -> Vec<EcdfPoint> {
    ecdf_of_counts(
        &results
            .iter()
            .map(|r| r.diagnostics.len())
            .collect::<Vec<_>>(),
    )
}

/// Proportion of packages with strictly fewer than `x` errors.
pub fn fraction_below(points: &[EcdfPoint], x: usize) -> f64 {
    points
        .iter()
        .take_while(|p| p.errors < x)
        .last()
        .map(|p| p.proportion)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PackageStatus {
    /// The package was migrated and checked.
    Ok,
    /// Migration itself failed; excluded from rate denominators.
    TranslateFailure,
    /// The compiler or the predictor ran out of time.
    Timeout,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeaveTotals {
    pub sites_found: usize,
    pub sites_annotated: usize,
    pub unmatched: usize,
    pub invalid_types: usize,
    pub reverted_files: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PackageRecord {
    pub name: String,
    pub category: Category,
    pub source_files: usize,
    pub lines: usize,
    pub status: PackageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub type_checks: bool,
    pub error_free_files: usize,
    pub total_files: usize,
    /// Trivial annotations in error-free files.
    pub trivial_annotations: usize,
    /// All annotations in error-free files.
    pub total_annotations: usize,
    pub error_count: usize,
    pub error_code_histogram: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyCount>,
    pub weave: WeaveTotals,
}

impl PackageRecord {
    /// A package whose migration failed before checking.
    pub fn failed(name: String, category: Category, status: PackageStatus, reason: String) -> Self {
        PackageRecord {
            name,
            category,
            source_files: 0,
            lines: 0,
            status,
            failure: Some(reason),
            type_checks: false,
            error_free_files: 0,
            total_files: 0,
            trivial_annotations: 0,
            total_annotations: 0,
            error_count: 0,
            error_code_histogram: BTreeMap::new(),
            accuracy: None,
            weave: WeaveTotals::default(),
        }
    }

    pub fn translated(&self) -> bool {
        self.status == PackageStatus::Ok
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rollup {
    pub label: String,
    pub packages: usize,
    pub source_files: usize,
    pub lines: usize,
    pub translated: usize,
    pub type_checked: usize,
    pub files: usize,
    pub error_free_files: usize,
    pub trivial_annotations: usize,
    pub total_annotations: usize,
    pub errors: usize,
    pub accuracy: AccuracyCount,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Rollup {
    fn of<'r>(label: &str, records: impl IntoIterator<Item = &'r PackageRecord>) -> Rollup {
        let mut r = Rollup {
            label: label.to_string(),
            ..Rollup::default()
        };
        for p in records {
            r.packages += 1;
            r.source_files += p.source_files;
            r.lines += p.lines;
            if !p.translated() {
                continue;
            }
            r.translated += 1;
            r.type_checked += usize::from(p.type_checks);
            r.files += p.total_files;
            r.error_free_files += p.error_free_files;
            r.trivial_annotations += p.trivial_annotations;
            r.total_annotations += p.total_annotations;
            r.errors += p.error_count;
            if let Some(a) = &p.accuracy {
                r.accuracy.add(a);
            }
        }
        r
    }

    pub fn type_check_rate(&self) -> Option<f64> {
        ratio(self.type_checked, self.translated)
    }
    pub fn error_free_rate(&self) -> Option<f64> {
        ratio(self.error_free_files, self.files)
    }
    pub fn trivial_rate(&self) -> Option<f64> {
        ratio(self.trivial_annotations, self.total_annotations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MigrationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub compiler_version: Option<String>,
    pub prediction_source: String,
    pub packages: Vec<PackageRecord>,
    pub rollups: Vec<Rollup>,
    pub overall: Rollup,
    /// The ten most common codes.
    pub top_error_codes: Vec<(String, usize)>,
    pub other_errors: usize,
    pub ecdf: Vec<EcdfPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before_after: Option<PairedComparison>,
}

impl MigrationReport {
    /// Builds a report; every aggregate is derived from `packages`.
    pub fn new(
        prediction_source: &str,
        compiler_version: Option<String>,
        mut packages: Vec<PackageRecord>,
    ) -> Self {
        packages.sort_by(|a, b| a.name.cmp(&b.name));
        let rollups = Category::ALL
            .iter()
            .map(|c| Rollup::of(c.label(), packages.iter().filter(|p| p.category == *c)))
            .collect();
        let overall = Rollup::of("Overall", &packages);
        let mut histogram = BTreeMap::new();
        for p in packages.iter().filter(|p| p.translated()) {
            for (code, n) in &p.error_code_histogram {
                *histogram.entry(code.clone()).or_default() += n;
            }
        }
        let (top_error_codes, other_errors) = top_codes(&histogram, 10);
        let counts: Vec<usize> = packages
            .iter()
            .filter(|p| p.translated())
            .map(|p| p.error_count)
            .collect();
        MigrationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            compiler_version,
            prediction_source: prediction_source.to_string(),
            packages,
            rollups,
            overall,
            top_error_codes,
            other_errors,
            ecdf: ecdf_of_counts(&counts),
            before_after: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn accuracy_rollups(&self) -> Vec<&Rollup> {
        self.rollups
            .iter()
            .zip(Category::ALL)
            .filter(|(_, c)| c.has_ground_truth())
            .map(|(r, _)| r)
            .collect()
    }

    /// Plain-text tables.
    pub fn tables(&self) -> String {
        let mut s = String::new();
        let rows: Vec<&Rollup> = self
            .rollups
            .iter()
            .chain(std::iter::once(&self.overall))
            .collect();

        let _ = writeln!(s, "Dataset summary");
        let _ = writeln!(
            s,
            "{:<28} {:>9} {:>9} {:>14}",
            "Dataset category", "Packages", "Files", "Lines of code"
        );
        for r in &rows {
            let _ = writeln!(
                s,
                "{:<28} {:>9} {:>9} {:>14}",
                r.label,
                thousands(r.packages),
                thousands(r.source_files),
                thousands(r.lines)
            );
        }

        let _ = writeln!(s, "\nPackages that type check");
        table_header(&mut s);
        for r in &rows {
            table_row(&mut s, &r.label, r.type_checked, r.translated);
        }

        let _ = writeln!(s, "\nFiles with no compilation errors");
        table_header(&mut s);
        for r in &rows {
            table_row(&mut s, &r.label, r.error_free_files, r.files);
        }

        let _ = writeln!(
            s,
            "\nTrivial annotations (any, any[], Function) in error-free files"
        );
        table_header(&mut s);
        for r in &rows {
            table_row(&mut s, &r.label, r.trivial_annotations, r.total_annotations);
        }

        let _ = writeln!(s, "\nAccuracy against non-any ground truth");
        table_header(&mut s);
        let mut overall = AccuracyCount::default();
        for r in self.accuracy_rollups() {
            table_row(&mut s, &r.label, r.accuracy.matched, r.accuracy.compared);
            overall.add(&r.accuracy);
        }
        table_row(&mut s, "Overall", overall.matched, overall.compared);

        let _ = writeln!(s, "\nMost common error codes");
        let _ = writeln!(s, "{:<8} {:>8}  Message", "Code", "Count");
        for (code, n) in &self.top_error_codes {
            let _ = writeln!(
                s,
                "{:<8} {:>8}  {}",
                code,
                thousands(*n),
                code_message(code)
            );
        }
        let _ = writeln!(s, "{:<8} {:>8}", "Other", thousands(self.other_errors));
        let total: usize =
            self.top_error_codes.iter().map(|(_, n)| n).sum::<usize>() + self.other_errors;
        let _ = writeln!(s, "{:<8} {:>8}", "Total", thousands(total));

        if let Some(pair) = &self.before_after {
            s.push('\n');
            s.push_str(&pair.table());
        }
        s
    }

    /// Writes `report.json`, `tables.txt` and the plot series to `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), MetricsError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| MetricsError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let p = dir.join("report.json");
        fs::write(&p, self.to_json()).map_err(io(&p))?;
        let p = dir.join("tables.txt");
        fs::write(&p, self.tables()).map_err(io(&p))?;

        let mut w = csv::Writer::from_path(dir.join("ecdf.csv"))?;
        w.write_record(["errors", "proportion"])?;
        for pt in &self.ecdf {
            w.write_record([pt.errors.to_string(), format!("{:.6}", pt.proportion)])?;
        }
        w.flush().map_err(io(dir))?;

        let mut w = csv::Writer::from_path(dir.join("error_codes.csv"))?;
        w.write_record(["code", "count"])?;
        for (code, n) in &self.top_error_codes {
            w.write_record([code.clone(), n.to_string()])?;
        }
        w.write_record(["Other".to_string(), self.other_errors.to_string()])?;
        w.flush().map_err(io(dir))?;

        let mut w = csv::Writer::from_path(dir.join("errorfree_per_package.csv"))?;
        w.write_record([
            "package",
            "category",
            "error_free_files",
            "files",
            "percent",
        ])?;
        for p in self.packages.iter().filter(|p| p.translated()) {
            let pct = ratio(p.error_free_files, p.total_files)
                .map(|r| format!("{:.1}", r * 100.0))
                .unwrap_or_default();
            w.write_record([
                p.name.clone(),
                p.category.label().to_string(),
                p.error_free_files.to_string(),
                p.total_files.to_string(),
                pct,
            ])?;
        }
        w.flush().map_err(io(dir))?;
        Ok(())
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn percent(r: Option<f64>) -> String {
    r.map(|r| format!("{:.1}", r * 100.0))
        .unwrap_or_else(|| "-".into())
}

fn table_header(s: &mut String) {
    let _ = writeln!(
        s,
        "{:<28} {:>9} {:>9} {:>7}",
        "Dataset category", "ok", "Total", "%"
    );
}

fn table_row(s: &mut String, label: &str, ok: usize, total: usize) {
    let _ = writeln!(
        s,
        "{:<28} {:>9} {:>9} {:>7}",
        label,
        thousands(ok),
        thousands(total),
        percent(ratio(ok, total))
    );
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairedRow {
    pub label: String,
    pub type_check_before: Option<f64>,
    pub type_check_after: Option<f64>,
    pub error_free_before: Option<f64>,
    pub error_free_after: Option<f64>,
    pub accuracy_before: Option<f64>,
    pub accuracy_after: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TypeCheckTransitions {
    pub before_only: Vec<String>,
    pub after_only: Vec<String>,
    pub both: Vec<String>,
    pub neither: Vec<String>,
    /// Packages that failed to translate in at least one run.
    pub failed_in_either: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairedComparison {
    pub rows: Vec<PairedRow>,
    pub transitions: TypeCheckTransitions,
}

impl PairedComparison {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Before and after module conversion (%)");
        let _ = writeln!(
            s,
            "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "Dataset category",
            "tc-before",
            "tc-after",
            "ef-before",
            "ef-after",
            "acc-before",
            "acc-after"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
                r.label,
                percent(r.type_check_before),
                percent(r.type_check_after),
                percent(r.error_free_before),
                percent(r.error_free_after),
                percent(r.accuracy_before),
                percent(r.accuracy_after)
            );
        }
        let t = &self.transitions;
        let _ = writeln!(
            s,
            "type check before only: {}, after only: {}, both: {}, neither: {}, failed in either run: {}",
            t.before_only.len(),
            t.after_only.len(),
            t.both.len(),
            t.neither.len(),
            t.failed_in_either.len()
        );
        s
    }
}

/// Pairs two reports over the same packages.
pub fn before_after_compare(
    before: &MigrationReport,
    after: &MigrationReport,
) -> Result<PairedComparison, MetricsError> {
    let b: BTreeMap<&str, &PackageRecord> = before
        .packages
        .iter()
        .map(|p| (p.name.as_str(), p))
        .collect();
    let a: BTreeMap<&str, &PackageRecord> = after
        .packages
        .iter()
        .map(|p| (p.name.as_str(), p))
        .collect();
    let only_before: Vec<String> = b
        .keys()
        .filter(|k| !a.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    let only_after: Vec<String> = a
        .keys()
        .filter(|k| !b.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !only_before.is_empty() || !only_after.is_empty() {
        return Err(MetricsError::PackageSetMismatch {
            before: only_before,
            after: only_after,
        });
    }
    let mut transitions = TypeCheckTransitions::default();
    for (name, pb) in &b {
        let pa = a[name];
        let name = name.to_string();
        if !pb.translated() || !pa.translated() {
            transitions.failed_in_either.push(name);
            continue;
        }
        match (pb.type_checks, pa.type_checks) {
            (true, true) => transitions.both.push(name),
            (true, false) => transitions.before_only.push(name),
            (false, true) => transitions.after_only.push(name),
            (false, false) => transitions.neither.push(name),
        }
    }
    let rows = before
        .rollups
        .iter()
        .chain(std::iter::once(&before.overall))
        .zip(after.rollups.iter().chain(std::iter::once(&after.overall)))
        .map(|(rb, ra)| PairedRow {
            label: rb.label.clone(),
            type_check_before: rb.type_check_rate(),
            type_check_after: ra.type_check_rate(),
            error_free_before: rb.error_free_rate(),
            error_free_after: ra.error_free_rate(),
            accuracy_before: rb.accuracy.rate(),
            accuracy_after: ra.accuracy.rate(),
        })
        .collect();
    Ok(PairedComparison { rows, transitions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(codes: &[&str]) -> CheckResult {
        CheckResult {
            package: "p".into(),
            diagnostics: codes
                .iter()
                .map(|c| Diagnostic {
                    file: Some("a.ts".into()),
                    line: 1,
                    column: 1,
                    code: c.to_string(),
                    message: String::new(),
                })
                .collect(),
            files_checked: 1,
            error_free_files: usize::from(codes.is_empty()),
            type_checks: codes.is_empty(),
            declarations_dir: None,
            compiler_version: None,
            raw_log: Vec::new(),
        }
    }

    #[test]
    fn trivial_ratio_counts_sites() {
        let f = SourceUnit::new(
            "a.ts",
            "let a: any = 1; let b: number = 2; let c: Function = f; function g(x: any[]) {}",
        );
        let clean = check(&[]);
        assert_eq!(
            trivial_annotation_ratio(std::slice::from_ref(&f), &clean, true),
            Some(0.75)
        );
        let plain = SourceUnit::new("b.ts", "let a = 1;");
        assert_eq!(trivial_annotation_ratio(&[plain], &clean, true), None);
        let dirty = check(&["TS2322"]);
        assert_eq!(trivial_annotation_ratio(&[f], &dirty, true), None);
    }

    #[test]
    fn histogram_and_top_codes() {
        let h = error_code_histogram(&[check(&["TS2339", "TS2339"]), check(&["TS2322"])]);
        assert_eq!(
            h,
            BTreeMap::from([("TS2339".to_string(), 2), ("TS2322".to_string(), 1)])
        );
        assert!(error_code_histogram(&[]).is_empty());
        let (top, other) = top_codes(&h, 1);
        assert_eq!(top, [("TS2339".to_string(), 2)]);
        assert_eq!(other, 1);
    }

    #[test]
    fn ecdf_steps() {
        let pts = ecdf_of_counts(&[0, 0, 5]);
        assert_eq!(pts.len(), 2);
        assert!((fraction_below(&pts, 5) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(fraction_below(&pts, 0), 0.0);
        assert_eq!(pts.last().unwrap().proportion, 1.0);
        assert_eq!(
            ecdf_of_counts(&[7]),
            [EcdfPoint {
                errors: 7,
                proportion: 1.0
            }]
        );
    }

    fn record(name: &str, category: Category, type_checks: bool) -> PackageRecord {
        PackageRecord {
            type_checks,
            total_files: 2,
            error_free_files: if type_checks { 2 } else { 1 },
            error_count: usize::from(!type_checks),
            error_code_histogram: if type_checks {
                BTreeMap::new()
            } else {
                BTreeMap::from([("TS2322".into(), 1)])
            },
            status: PackageStatus::Ok,
            failure: None,
            ..PackageRecord::failed(name.into(), category, PackageStatus::Ok, String::new())
        }
    }

    #[test]
    fn rollups_and_denominators() {
        let failed = PackageRecord::failed(
            "z".into(),
            Category::NeverTypedNoDeps,
            PackageStatus::TranslateFailure,
            "boom".into(),
        );
        let r = MigrationReport::new(
            "test",
            None,
            vec![
                record("a", Category::NeverTypedNoDeps, true),
                record("b", Category::NeverTypedNoDeps, false),
                failed,
            ],
        );
        assert_eq!(r.overall.packages, 3);
        assert_eq!(r.overall.translated, 2);
        assert_eq!(r.overall.type_check_rate(), Some(0.5));
        assert_eq!(r.overall.files, 4);
        assert_eq!(r.top_error_codes, [("TS2322".to_string(), 1)]);
        let back = MigrationReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.tables().contains("Never typed, no deps"));
    }

    #[test]
    fn before_after() {
        let before = MigrationReport::new(
            "b",
            None,
            vec![record("a", Category::NeverTypedNoDeps, false)],
        );
        let after = MigrationReport::new(
            "a",
            None,
            vec![record("a", Category::NeverTypedNoDeps, true)],
        );
        let same = before_after_compare(&before, &before).unwrap();
        assert!(same
            .rows
            .iter()
            .all(|r| r.type_check_before == r.type_check_after));
        let pair = before_after_compare(&before, &after).unwrap();
        assert_eq!(pair.transitions.after_only, ["a"]);
        let other = MigrationReport::new(
            "x",
            None,
            vec![record("q", Category::NeverTypedNoDeps, true)],
        );
        assert!(matches!(
            before_after_compare(&before, &other),
            Err(MetricsError::PackageSetMismatch { .. })
        ));
    }
}
