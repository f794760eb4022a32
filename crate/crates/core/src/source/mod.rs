//! Source files, token streams and source coordinates.
//!
//! Lines are 1-based and columns are 0-based UTF-16 code units, matching the
//! coordinates used by TypeScript tooling and by the location-keyed
//! prediction format.

pub mod lexer;

use std::fmt;
use std::ops::Range;

use oxc_allocator::Allocator;
use oxc_ast::ast::Program;
use oxc_parser::Parser;
use oxc_span::SourceType;
use serde::{Deserialize, Serialize};

pub use lexer::TokenKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub line: u32,
    pub column: u32,
}

/// A source range. Ordering is lexicographic on
/// `(startLine, startCol, endLine, endCol)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: Position,
    pub end: Position,
}

impl Span {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        Span {
            start: Position {
                line: start_line,
                column: start_col,
            },
            end: Position {
                line: end_line,
                column: end_col,
            },
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}:{}",
            self.start.line, self.start.column, self.end.line, self.end.column
        )
    }
}

/// Maps byte offsets to positions and back.
#[derive(Debug, Clone)]
pub struct LineIndex {
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut line_starts = vec![0];
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'\n' => line_starts.push(i + 1),
                b'\r' => {
                    if bytes.get(i + 1) != Some(&b'\n') {
                        line_starts.push(i + 1);
                    }
                }
                // U+2028 / U+2029 are E2 80 A8 / E2 80 A9.
                0xE2 if bytes.get(i + 1) == Some(&0x80)
                    && matches!(bytes.get(i + 2), Some(0xA8 | 0xA9)) =>
                {
                    line_starts.push(i + 3);
                    i += 2;
                }
                _ => {}
            }
            i += 1;
        }
        LineIndex { line_starts }
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }

    pub fn position(&self, text: &str, offset: usize) -> Position {
        let line = self.line_starts.partition_point(|&s| s <= offset) - 1;
        let column: usize = text[self.line_starts[line]..offset]
            .chars()
            .map(char::len_utf16)
            .sum();
        Position {
            line: line as u32 + 1,
            column: column as u32,
        }
    }

    /// Byte offset of a position, or `None` if it lies outside the text.
    pub fn offset(&self, text: &str, pos: Position) -> Option<usize> {
        let line = (pos.line as usize).checked_sub(1)?;
        let start = *self.line_starts.get(line)?;
        let end = self
            .line_starts
            .get(line + 1)
            .copied()
            .unwrap_or(text.len());
        let mut units = 0u32;
        for (i, c) in text[start..end].char_indices() {
            if units == pos.column {
                return Some(start + i);
            }
            units += c.len_utf16() as u32;
        }
        (units == pos.column).then_some(end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    pub span: Span,
    #[serde(skip)]
    pub range: Range<usize>,
}

/// Which grammar a text is parsed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    JavaScript,
    TypeScript,
    Declaration,
}

impl Dialect {
    pub fn for_path(path: &str) -> Dialect {
        if path.ends_with(".d.ts") || path.ends_with(".d.mts") {
            Dialect::Declaration
        } else if path.ends_with(".ts") || path.ends_with(".mts") {
            Dialect::TypeScript
        } else {
            Dialect::JavaScript
        }
    }

    fn source_types(self) -> &'static [fn() -> SourceType] {
        match self {
            // CommonJS files are scripts; some of them only parse in sloppy mode.
            Dialect::JavaScript => &[SourceType::mjs, SourceType::cjs],
            Dialect::TypeScript => &[SourceType::ts],
            Dialect::Declaration => &[SourceType::d_ts],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ParseError {
    pub message: String,
}

/// Parses `text` and hands the syntax tree to `f`.
pub fn with_program<R>(
    text: &str,
    dialect: Dialect,
    f: impl for<'a> FnOnce(&Program<'a>) -> R,
) -> Result<R, ParseError> {
    let mut first_error = None;
    for make in dialect.source_types() {
        let allocator = Allocator::default();
        let ret = Parser::new(&allocator, text, make()).parse();
        if !ret.diagnostics.has_errors() && !ret.fatal_error {
            return Ok(f(&ret.program));
        }
        if first_error.is_none() {
            let message = ret
                .diagnostics
                .errors()
                .next()
                .map(|e| e.to_string())
                .unwrap_or_else(|| "parser gave up".to_string());
            first_error = Some(ParseError { message });
        }
    }
    Err(first_error.expect("at least one source type is tried"))
}

pub fn parses(text: &str, dialect: Dialect) -> bool {
    with_program(text, dialect, |_| ()).is_ok()
}

/// A source file together with its token stream.
///
/// The syntax tree is not stored: oxc trees borrow an arena, so
/// [`SourceUnit::with_program`] re-parses the owned text on demand. Both the
/// token stream and the tree are therefore always derived from `text`.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub relative_path: String,
    pub text: String,
    tokens: Vec<Token>,
    lines: LineIndex,
    parse_error: Option<ParseError>,
}

impl SourceUnit {
    pub fn new(relative_path: impl Into<String>, text: impl Into<String>) -> Self {
        let relative_path = relative_path.into();
        let text = text.into();
        let lines = LineIndex::new(&text);
        let tokens = lexer::tokenize(&text)
            .into_iter()
            .map(|raw| Token {
                text: text[raw.range.clone()].to_string(),
                kind: raw.kind,
                span: Span {
                    start: lines.position(&text, raw.range.start),
                    end: lines.position(&text, raw.range.end),
                },
                range: raw.range,
            })
            .collect();
        let parse_error = if relative_path.ends_with(".jsx") || relative_path.ends_with(".tsx") {
            Some(ParseError {
                message: "JSX sources are not supported".into(),
            })
        } else {
            with_program(&text, Dialect::for_path(&relative_path), |_| ()).err()
        };
        SourceUnit {
            relative_path,
            text,
            tokens,
            lines,
            parse_error,
        }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn dialect(&self) -> Dialect {
        Dialect::for_path(&self.relative_path)
    }

    pub fn parse_error(&self) -> Option<&ParseError> {
        self.parse_error.as_ref()
    }

    pub fn parses(&self) -> bool {
        self.parse_error.is_none()
    }

    pub fn line_index(&self) -> &LineIndex {
        &self.lines
    }

    pub fn position(&self, offset: usize) -> Position {
        self.lines.position(&self.text, offset)
    }

    pub fn span_of(&self, range: Range<usize>) -> Span {
        Span {
            start: self.position(range.start),
            end: self.position(range.end),
        }
    }

    pub fn offset(&self, pos: Position) -> Option<usize> {
        self.lines.offset(&self.text, pos)
    }

    pub fn with_program<R>(
        &self,
        f: impl for<'a> FnOnce(&Program<'a>) -> R,
    ) -> Result<R, ParseError> {
        if let Some(e) = &self.parse_error {
            return Err(e.clone());
        }
        with_program(&self.text, self.dialect(), f)
    }

    /// Index of the first token starting at or after `offset`.
    pub fn token_index_at(&self, offset: usize) -> usize {
        self.tokens.partition_point(|t| t.range.start < offset)
    }

    /// Physical newline-delimited line count.
    pub fn physical_lines(&self) -> usize {
        count_physical_lines(&self.text)
    }
}

pub fn count_physical_lines(text: &str) -> usize {
    if text.is_empty() {
        return 0;
    }
    let newlines = text.bytes().filter(|&b| b == b'\n').count();
    if text.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

/// Byte-range views of a token stream with everything in between treated as
/// trivia; used to check that trivia really is only whitespace and comments.
pub fn trivia_gaps(text: &str, tokens: &[Token]) -> Vec<Range<usize>> {
    let mut gaps = Vec::with_capacity(tokens.len() + 1);
    let mut at = 0;
    for t in tokens {
        gaps.push(at..t.range.start);
        at = t.range.end;
    }
    gaps.push(at..text.len());
    gaps
}
