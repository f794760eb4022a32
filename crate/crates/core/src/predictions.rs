//! Prediction interchange formats.
//!
//! Token-aligned tables have one row per lexical token as produced by the
//! predictor's own tokenizer, no header:
//!
//! ```text
//! tokenText,tokenKind[,type1,prob1[,...,type5,prob5]]
//! ```
//!
//! Location-keyed tables have a header and one row per declaration, keyed by
//! the identifier span (1-based lines, 0-based columns, end exclusive):
//!
//! ```text
//! file,line1,col1,line2,col2,t1,p1,t2,p2,t3,p3,t4,p4,t5,p5
//! ```
//!
//! Both are UTF-8 comma-separated with RFC 4180 quoting.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::source::Span;

pub const MAX_CANDIDATES: usize = 5;

pub const LOCATION_HEADER: [&str; 15] = [
    "file", "line1", "col1", "line2", "col2", "t1", "p1", "t2", "p2", "t3", "p3", "t4", "p4", "t5",
    "p5",
];

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("{path}: row {row}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("{path}: row {row}: duplicate span {span}")]
    DuplicateSpan {
        path: PathBuf,
        row: usize,
        span: Span,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub type_text: String,
    pub probability: f64,
}

/// Up to five candidates in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidates(Vec<Candidate>);

impl RankedCandidates {
    pub fn new(candidates: Vec<Candidate>) -> Result<Self, String> {
        if candidates.is_empty() {
            return Err("no candidates".into());
        }
        if candidates.len() > MAX_CANDIDATES {
            return Err(format!(
                "{} candidates, at most {MAX_CANDIDATES} allowed",
                candidates.len()
            ));
        }
        for c in &candidates {
            if !(0.0..=1.0).contains(&c.probability) {
                return Err(format!("probability {} outside [0, 1]", c.probability));
            }
            if c.type_text.is_empty() {
                return Err("empty type text".into());
            }
        }
        if candidates
            .windows(2)
            .any(|w| w[1].probability > w[0].probability)
        {
            return Err("probabilities are not in non-increasing rank order".into());
        }
        Ok(RankedCandidates(candidates))
    }

    pub fn single(type_text: impl Into<String>, probability: f64) -> Self {
        RankedCandidates::new(vec![Candidate {
            type_text: type_text.into(),
            probability,
        }])
        .expect("one valid candidate")
    }

    /// The highest-ranked candidate; the only one ever woven.
    pub fn top(&self) -> &Candidate {
        &self.0[0]
    }

    pub fn as_slice(&self) -> &[Candidate] {
        &self.0
    }
}

fn parse_candidates(cells: &[String]) -> Result<RankedCandidates, String> {
    if !cells.len().is_multiple_of(2) {
        return Err("type/probability columns must come in pairs".into());
    }
    let mut out = Vec::with_capacity(cells.len() / 2);
    for pair in cells.chunks(2) {
        let probability: f64 = pair[1]
            .trim()
            .parse()
            .map_err(|_| format!("unparseable probability {:?}", pair[1]))?;
        if !probability.is_finite() {
            return Err(format!("unparseable probability {:?}", pair[1]));
        }
        out.push(Candidate {
            type_text: pair[0].clone(),
            probability,
        });
    }
    RankedCandidates::new(out)
}

fn push_candidates(record: &mut Vec<String>, candidates: &RankedCandidates) {
    for c in candidates.as_slice() {
        record.push(c.type_text.clone());
        record.push(c.probability.to_string());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRow {
    pub token_text: String,
    pub token_kind: String,
    /// Absent for non-identifier tokens.
    pub candidates: Option<RankedCandidates>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenPredictionTable {
    pub rows: Vec<TokenRow>,
}

fn reader(text: &str, has_headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn read_file(path: &Path) -> Result<String, PredictionError> {
    fs::read_to_string(path).map_err(|source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl TokenPredictionTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self, PredictionError> {
        let malformed = |row: usize, reason: String| PredictionError::MalformedRow {
            path: path.to_path_buf(),
            row,
            reason,
        };
        let mut rows = Vec::new();
        for (i, record) in reader(text, false).records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| malformed(row, e.to_string()))?;
            let cells: Vec<String> = record.iter().map(str::to_string).collect();
            let n = cells.len();
            if n < 2 || !(n - 2).is_multiple_of(2) || (n - 2) / 2 > MAX_CANDIDATES {
                return Err(malformed(
                    row,
                    format!("expected 2 + 2k columns with k <= {MAX_CANDIDATES}, found {n}"),
                ));
            }
            let candidates = if n == 2 {
                None
            } else {
                Some(parse_candidates(&cells[2..]).map_err(|r| malformed(row, r))?)
            };
            rows.push(TokenRow {
                token_text: cells[0].clone(),
                token_kind: cells[1].clone(),
                candidates,
            });
        }
        Ok(TokenPredictionTable { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_writer(Vec::new());
        for row in &self.rows {
            let mut record = vec![row.token_text.clone(), row.token_kind.clone()];
            if let Some(c) = &row.candidates {
                push_candidates(&mut record, c);
            }
            w.write_record(&record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
    }
}

pub fn load_token_predictions(path: &Path) -> Result<TokenPredictionTable, PredictionError> {
    TokenPredictionTable::parse(&read_file(path)?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEntry {
    pub file: String,
    pub candidates: RankedCandidates,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocationPredictionTable {
    pub entries: BTreeMap<Span, LocationEntry>,
}

impl LocationPredictionTable {
    pub fn get(&self, span: &Span) -> Option<&RankedCandidates> {
        self.entries.get(span).map(|e| &e.candidates)
    }

    pub fn insert(&mut self, file: &str, span: Span, candidates: RankedCandidates) -> bool {
        self.entries
            .insert(
                span,
                LocationEntry {
                    file: file.to_string(),
                    candidates,
                },
            )
            .is_none()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, PredictionError> {
        let malformed = |row: usize, reason: String| PredictionError::MalformedRow {
            path: path.to_path_buf(),
            row,
            reason,
        };
        let mut table = LocationPredictionTable::default();
        let mut records = reader(text, false).into_records();
        let Some(header) = records.next() else {
            return Ok(table);
        };
        let header = header.map_err(|e| malformed(1, e.to_string()))?;
        let expected = &LOCATION_HEADER[..header.len().min(LOCATION_HEADER.len())];
        if header.len() < 5 || header.iter().ne(expected.iter().copied()) {
            return Err(malformed(
                1,
                format!("expected header {}", LOCATION_HEADER.join(",")),
            ));
        }
        for (i, record) in records.enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| malformed(row, e.to_string()))?;
            let cells: Vec<String> = record.iter().map(str::to_string).collect();
            let n = cells.len();
            if n < 7 || !(n - 5).is_multiple_of(2) || (n - 5) / 2 > MAX_CANDIDATES {
                return Err(malformed(
                    row,
                    format!("expected 5 + 2k columns with 1 <= k <= {MAX_CANDIDATES}, found {n}"),
                ));
            }
            let coord = |k: usize| -> Result<u32, PredictionError> {
                cells[k]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(row, format!("bad coordinate {:?}", cells[k])))
            };
            let span = Span::new(coord(1)?, coord(2)?, coord(3)?, coord(4)?);
            if span.start.line == 0 || span.end < span.start {
                return Err(malformed(row, format!("invalid span {span}")));
            }
            let candidates = parse_candidates(&cells[5..]).map_err(|r| malformed(row, r))?;
            if !table.insert(&cells[0], span, candidates) {
                return Err(PredictionError::DuplicateSpan {
                    path: path.to_path_buf(),
                    row,
                    span,
                });
            }
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_writer(Vec::new());
        w.write_record(LOCATION_HEADER).expect("writing to memory");
        for (span, entry) in &self.entries {
            let mut record = vec![
                entry.file.clone(),
                span.start.line.to_string(),
                span.start.column.to_string(),
                span.end.line.to_string(),
                span.end.column.to_string(),
            ];
            push_candidates(&mut record, &entry.candidates);
            w.write_record(&record).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
    }
}

pub fn load_location_predictions(path: &Path) -> Result<LocationPredictionTable, PredictionError> {
    LocationPredictionTable::parse(&read_file(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    TokenAligned,
    LocationKeyed,
}

/// Canonicalizes a predicted type name. Total and idempotent.
pub fn normalize_type(raw: &str, format: SourceFormat) -> String {
    let trimmed = raw.trim();
    let mapped = match trimmed {
        "Number" => "number",
        "Boolean" => "boolean",
        "String" => "string",
        "Object" => "object",
        "Void" => "void",
        "Array" => "any[]",
        "complex" if format == SourceFormat::TokenAligned => "any",
        other => other,
    };
    mapped.to_string()
}
