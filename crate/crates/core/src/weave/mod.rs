//! Inserting predicted types into JavaScript sources.
//!
//! Weaving runs in two phases. The first matches prediction rows to
//! [`AnnotationSite`]s and validates each chosen type text, producing a
//! [`WeavePlan`]. The second applies the plan to the text and re-parses the
//! result; a file whose result fails to parse is reverted as a whole.

mod sites;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use sites::{collect_sites, present_annotations, AnnotationSite, PresentAnnotation, SiteKind};

use crate::predictions::{
    normalize_type, LocationPredictionTable, PredictionError, SourceFormat, TokenPredictionTable,
};
use crate::project::{dependency_declarations, PackageUnit};
use crate::source::{Dialect, ParseError, SourceUnit};
use crate::typesyntax;

#[derive(Debug, thiserror::Error)]
pub enum WeaveError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WeaveError + '_ {
    move |source| WeaveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One accepted annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub site: AnnotationSite,
    pub type_text: String,
}

/// The result of matching predictions to sites, before any text changes.
#[derive(Debug, Clone, Default)]
pub struct WeavePlan {
    pub assignments: Vec<Assignment>,
    /// Sites with no matching prediction.
    pub unmatched: Vec<AnnotationSite>,
    /// Sites whose chosen prediction did not parse as a type.
    pub invalid: Vec<(AnnotationSite, String)>,
    /// Total number of sites considered.
    pub sites_found: usize,
}

impl WeavePlan {
    fn assign(&mut self, site: &AnnotationSite, raw: Option<&str>, format: SourceFormat) {
        match raw {
            None => self.unmatched.push(site.clone()),
            Some(raw) => {
                let type_text = normalize_type(raw, format);
                if typesyntax::is_type(&type_text) {
                    self.assignments.push(Assignment {
                        site: site.clone(),
                        type_text,
                    });
                } else {
                    self.invalid.push((site.clone(), type_text));
                }
            }
        }
    }
}

/// A woven file.
#[derive(Debug, Clone)]
pub struct WovenFile {
    pub unit: SourceUnit,
    pub plan: WeavePlan,
    /// True when the annotated text failed to parse and the original text
    /// was emitted instead.
    pub reverted: bool,
}

impl WovenFile {
    pub fn record(&self, original_path: &str) -> WeaveRecord {
        WeaveRecord {
            file: original_path.to_string(),
            sites_found: self.plan.sites_found,
            sites_annotated: if self.reverted {
                0
            } else {
                self.plan.assignments.len()
            },
            unmatched: self.plan.unmatched.len(),
            reverted: self.reverted,
            invalid_types: self.plan.invalid.len(),
            error: None,
        }
    }
}

/// One line of the per-package weave log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeaveRecord {
    pub file: String,
    pub sites_found: usize,
    pub sites_annotated: usize,
    pub unmatched: usize,
    pub reverted: bool,
    pub invalid_types: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `.js` becomes `.ts`, `.mjs` becomes `.mts`.
pub fn typescript_path(path: &str) -> String {
    if let Some(stem) = path.strip_suffix(".mjs") {
        format!("{stem}.mts")
    } else if let Some(stem) = path.strip_suffix(".cjs") {
        format!("{stem}.cts")
    } else if let Some(stem) = path.strip_suffix(".js") {
        format!("{stem}.ts")
    } else {
        path.to_string()
    }
}

/// Matches location-keyed predictions to the sites of `unit`.
pub fn plan_location_keyed(
    unit: &SourceUnit,
    table: &LocationPredictionTable,
) -> Result<WeavePlan, WeaveError> {
    let sites = sites_of(unit)?;
    let mut plan = WeavePlan {
        sites_found: sites.len(),
        ..WeavePlan::default()
    };
    for site in &sites {
        let raw = site
            .identifier
            .as_ref()
            .and_then(|_| table.get(&site.span))
            .map(|c| c.top().type_text.as_str());
        plan.assign(site, raw, SourceFormat::LocationKeyed);
    }
    Ok(plan)
}

/// Matches token-aligned predictions to the sites of `unit`.
///
/// Sites are grouped by declaration header. Each header must appear as an
/// exact contiguous window of row tokens; windows are searched left to right
/// from a cursor that only moves forward, so rows dropped by the upstream
/// tokenizer can only be skipped between declarations.
pub fn plan_token_aligned(
    unit: &SourceUnit,
    table: &TokenPredictionTable,
) -> Result<WeavePlan, WeaveError> {
    let sites = sites_of(unit)?;
    let mut plan = WeavePlan {
        sites_found: sites.len(),
        ..WeavePlan::default()
    };

    let mut groups: BTreeMap<(usize, usize), Vec<&AnnotationSite>> = BTreeMap::new();
    for site in &sites {
        groups
            .entry((site.header_range.start, site.header))
            .or_default()
            .push(site);
    }

    let rows = &table.rows;
    let mut cursor = 0;
    for group in groups.values() {
        let header = &group[0].declaration_tokens;
        let found = (cursor..rows.len().saturating_sub(header.len() - 1)).find(|&i| {
            header
                .iter()
                .zip(&rows[i..])
                .all(|(h, r)| *h == r.token_text)
        });
        let Some(start) = found else {
            for site in group {
                plan.unmatched.push((*site).clone());
            }
            continue;
        };
        cursor = start + header.len();
        for site in group {
            let raw = site
                .identifier
                .as_ref()
                .and(site.identifier_index)
                .and_then(|k| rows[start + k].candidates.as_ref())
                .map(|c| c.top().type_text.as_str());
            plan.assign(site, raw, SourceFormat::TokenAligned);
        }
    }
    Ok(plan)
}

fn sites_of(unit: &SourceUnit) -> Result<Vec<AnnotationSite>, WeaveError> {
    collect_sites(unit).map_err(|source| WeaveError::Parse {
        path: unit.relative_path.clone(),
        source,
    })
}

/// Applies a plan, reverting the whole file if the result does not parse.
pub fn apply_plan(unit: &SourceUnit, plan: WeavePlan) -> WovenFile {
    let out_path = typescript_path(&unit.relative_path);
    let mut edits: Vec<(usize, &str)> = plan
        .assignments
        .iter()
        .map(|a| (a.site.insert_at, a.type_text.as_str()))
        .collect();
    edits.sort_by_key(|e| std::cmp::Reverse(e.0));
    let mut text = unit.text.clone();
    for (at, ty) in edits {
        text.insert_str(at, &format!(": {ty}"));
    }
    let woven = SourceUnit::new(out_path.clone(), text);
    if woven.parses() || plan.assignments.is_empty() {
        WovenFile {
            unit: woven,
            plan,
            reverted: false,
        }
    } else {
        WovenFile {
            unit: SourceUnit::new(out_path, unit.text.clone()),
            plan,
            reverted: true,
        }
    }
}

pub fn weave_location_keyed(
    unit: &SourceUnit,
    table: &LocationPredictionTable,
) -> Result<WovenFile, WeaveError> {
    Ok(apply_plan(unit, plan_location_keyed(unit, table)?))
}

pub fn weave_token_aligned(
    unit: &SourceUnit,
    table: &TokenPredictionTable,
) -> Result<WovenFile, WeaveError> {
    Ok(apply_plan(unit, plan_token_aligned(unit, table)?))
}

/// Predictions for one file in either format.
#[derive(Debug, Clone)]
pub enum FilePredictions {
    Token(TokenPredictionTable),
    Location(LocationPredictionTable),
}

/// Result of weaving a whole package.
#[derive(Debug, Clone, Default)]
pub struct PackageWeave {
    pub records: Vec<WeaveRecord>,
    /// Woven files by output path.
    pub files: BTreeMap<String, SourceUnit>,
}

impl PackageWeave {
    pub fn sites_found(&self) -> usize {
        self.records.iter().map(|r| r.sites_found).sum()
    }
    pub fn sites_annotated(&self) -> usize {
        self.records.iter().map(|r| r.sites_annotated).sum()
    }
    pub fn unmatched(&self) -> usize {
        self.records.iter().map(|r| r.unmatched).sum()
    }
    pub fn reverted(&self) -> usize {
        self.records.iter().filter(|r| r.reverted).count()
    }
}

/// Weaves every file of `pkg` and writes the TypeScript package to `out`.
///
/// Files without predictions, and files that do not parse, are emitted with
/// their original text. Dependency declarations under `node_modules` are
/// copied so the output can be type checked on its own; the package's own
/// declaration files are not, since they are the ground truth.
pub fn weave_package(
    pkg: &PackageUnit,
    predictions: &HashMap<String, FilePredictions>,
    out: &Path,
) -> Result<PackageWeave, WeaveError> {
    let mut result = PackageWeave::default();
    for unit in &pkg.files {
        let (woven, record) = if !unit.parses() {
            let path = typescript_path(&unit.relative_path);
            let record = WeaveRecord {
                file: unit.relative_path.clone(),
                sites_found: 0,
                sites_annotated: 0,
                unmatched: 0,
                reverted: false,
                invalid_types: 0,
                error: unit.parse_error().map(|e| e.message.clone()),
            };
            (SourceUnit::new(path, unit.text.clone()), record)
        } else {
            let file = match predictions.get(&unit.relative_path) {
                Some(FilePredictions::Token(t)) => weave_token_aligned(unit, t)?,
                Some(FilePredictions::Location(t)) => weave_location_keyed(unit, t)?,
                None => weave_location_keyed(unit, &LocationPredictionTable::default())?,
            };
            let record = file.record(&unit.relative_path);
            (file.unit, record)
        };
        result.records.push(record);
        result.files.insert(woven.relative_path.clone(), woven);
    }

    fs::create_dir_all(out).map_err(io_err(out))?;
    for (path, unit) in &result.files {
        write_file(&out.join(path), &unit.text)?;
    }
    let manifest = pkg.root_dir.join("package.json");
    if manifest.is_file() {
        let target = out.join("package.json");
        fs::copy(&manifest, &target).map_err(io_err(&target))?;
    }
    for rel in dependency_declarations(&pkg.root_dir) {
        let target = out.join(&rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::copy(pkg.root_dir.join(&rel), &target).map_err(io_err(&target))?;
    }
    Ok(result)
}

fn write_file(path: &Path, text: &str) -> Result<(), WeaveError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Writes weave records as JSON lines.
pub fn write_weave_log(path: &Path, records: &[WeaveRecord]) -> Result<(), WeaveError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    for r in records {
        let line = serde_json::to_string(r).expect("weave records serialize");
        writeln!(f, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// Whether woven output for `dialect`-typed text parses.
pub fn woven_parses(unit: &SourceUnit) -> bool {
    matches!(unit.dialect(), Dialect::TypeScript | Dialect::Declaration) && unit.parses()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictions::{Candidate, RankedCandidates, TokenRow};
    use crate::source::Span;

    fn location_table(entries: &[(Span, &str)]) -> LocationPredictionTable {
        let mut t = LocationPredictionTable::default();
        for (span, ty) in entries {
            assert!(t.insert("a.js", *span, RankedCandidates::single(ty.to_string(), 1.0)));
        }
        t
    }

    #[test]
    fn location_keyed_weaving() {
        let unit = SourceUnit::new("a.js", "function f(x) {\n  return x + 1;\n}\n");
        let table = location_table(&[
            (Span::new(1, 9, 1, 10), "number"),
            (Span::new(1, 11, 1, 12), "number"),
        ]);
        let woven = weave_location_keyed(&unit, &table).unwrap();
        assert_eq!(woven.unit.relative_path, "a.ts");
        assert_eq!(
            woven.unit.text,
            "function f(x: number): number {\n  return x + 1;\n}\n"
        );
        assert!(!woven.reverted);
        assert_eq!(woven.plan.sites_found, 2);
    }

    #[test]
    fn invalid_type_text_is_skipped() {
        let unit = SourceUnit::new("a.mjs", "let v = 1;");
        let table = location_table(&[(Span::new(1, 4, 1, 5), "number number")]);
        let woven = weave_location_keyed(&unit, &table).unwrap();
        assert_eq!(woven.unit.relative_path, "a.mts");
        assert_eq!(woven.unit.text, "let v = 1;");
        assert_eq!(woven.plan.invalid.len(), 1);
    }

    fn rows(tokens: &[(&str, Option<&str>)]) -> TokenPredictionTable {
        TokenPredictionTable {
            rows: tokens
                .iter()
                .map(|(t, ty)| TokenRow {
                    token_text: t.to_string(),
                    token_kind: String::new(),
                    candidates: ty.map(|ty| {
                        RankedCandidates::new(vec![Candidate {
                            type_text: ty.into(),
                            probability: 0.9,
                        }])
                        .unwrap()
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn token_aligned_weaving_matches_header_windows() {
        let unit = SourceUnit::new("a.js", "function f(x) { return x }\nconst y = 2;\n");
        let table = rows(&[
            ("function", None),
            ("f", Some("number")),
            ("(", None),
            ("x", Some("number")),
            (")", None),
            ("{", None),
            ("return", None),
            // `x` and `}` were dropped upstream; that only affects the body.
            ("const", None),
            ("y", Some("Number")),
            ("=", None),
        ]);
        let woven = weave_token_aligned(&unit, &table).unwrap();
        assert_eq!(
            woven.unit.text,
            "function f(x: number): number { return x }\nconst y: number = 2;\n"
        );
    }

    #[test]
    fn token_aligned_header_with_gap_is_unmatched() {
        let unit = SourceUnit::new("a.js", "function f(x, y) {}");
        let table = rows(&[
            ("function", None),
            ("f", Some("void")),
            ("(", None),
            ("x", Some("string")),
            (")", None),
        ]);
        let woven = weave_token_aligned(&unit, &table).unwrap();
        assert_eq!(woven.unit.text, "function f(x, y) {}");
        assert_eq!(woven.plan.unmatched.len(), 3);
    }

    #[test]
    fn unparseable_result_is_reverted() {
        // An arrow body object literal cannot take a parameter type in a way
        // that breaks parsing, so force a failure via an unbalanced type.
        let unit = SourceUnit::new("a.js", "let v = 1;");
        let plan = WeavePlan {
            sites_found: 1,
            assignments: vec![Assignment {
                site: collect_sites(&unit).unwrap().remove(0),
                type_text: "{ a: number".into(),
            }],
            ..WeavePlan::default()
        };
        let woven = apply_plan(&unit, plan);
        assert!(woven.reverted);
        assert_eq!(woven.unit.text, "let v = 1;");
        assert_eq!(woven.record("a.js").sites_annotated, 0);
    }
}
