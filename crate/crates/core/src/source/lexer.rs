//! A lossless JavaScript tokenizer.
//!
//! Tokens carry byte ranges into the original text; everything between two
//! consecutive tokens is trivia (whitespace, line terminators, comments, a
//! leading hashbang). The lexer never fails: malformed input produces
//! [`TokenKind::Invalid`] tokens so that downstream alignment code can still
//! walk the stream.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuator,
    Number,
    String,
    Template,
    RegExp,
    PrivateName,
    Invalid,
}

impl TokenKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Identifier => "Identifier",
            TokenKind::Keyword => "Keyword",
            TokenKind::Punctuator => "Punctuator",
            TokenKind::Number => "Numeric",
            TokenKind::String => "String",
            TokenKind::Template => "Template",
            TokenKind::RegExp => "RegularExpression",
            TokenKind::PrivateName => "PrivateName",
            TokenKind::Invalid => "Invalid",
        }
    }
}

/// A raw token: kind plus byte range. Positions are attached by
/// [`crate::source::SourceUnit`], which owns the line index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub kind: TokenKind,
    pub range: Range<usize>,
}

const KEYWORDS: &[&str] = &[
    "await",
    "break",
    "case",
    "catch",
    "class",
    "const",
    "continue",
    "debugger",
    "default",
    "delete",
    "do",
    "else",
    "enum",
    "export",
    "extends",
    "false",
    "finally",
    "for",
    "function",
    "if",
    "implements",
    "import",
    "in",
    "instanceof",
    "interface",
    "let",
    "new",
    "null",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "static",
    "super",
    "switch",
    "this",
    "throw",
    "true",
    "try",
    "typeof",
    "var",
    "void",
    "while",
    "with",
    "yield",
];

/// Keywords after which a `/` starts a regular expression literal.
const REGEX_AFTER_KEYWORD: &[&str] = &[
    "await",
    "case",
    "delete",
    "do",
    "else",
    "extends",
    "in",
    "instanceof",
    "new",
    "return",
    "throw",
    "typeof",
    "void",
    "yield",
];

// Longest first within each leading character is not required: `match_punct`
// tries lengths 4..=1.
const PUNCTUATORS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==", "!=",
    "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "<<", ">>", "**", "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%",
    "&", "|", "^", "!", "~", "?", ":", "=", ".", "@",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_line_terminator(c: char) -> bool {
    matches!(c, '\n' | '\r' | '\u{2028}' | '\u{2029}')
}

fn is_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\u{0b}' | '\u{0c}' | '\u{a0}' | '\u{feff}')
        || (c as u32 > 0x7f && c.is_whitespace() && !is_line_terminator(c))
}

pub fn is_id_start(c: char) -> bool {
    c == '$' || c == '_' || c.is_alphabetic()
}

pub fn is_id_continue(c: char) -> bool {
    c == '$' || c == '_' || c == '\u{200c}' || c == '\u{200d}' || c.is_alphanumeric()
}

enum BraceFrame {
    Block,
    Template,
}

pub struct Lexer<'s> {
    text: &'s str,
    pos: usize,
    braces: Vec<BraceFrame>,
    tokens: Vec<RawToken>,
}

/// Tokenize `text`. The result is sorted and non-overlapping.
pub fn tokenize(text: &str) -> Vec<RawToken> {
    let mut lexer = Lexer {
        text,
        pos: 0,
        braces: Vec::new(),
        tokens: Vec::new(),
    };
    lexer.run();
    lexer.tokens
}

impl<'s> Lexer<'s> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn rest(&self) -> &'s str {
        &self.text[self.pos..]
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.tokens.push(RawToken {
            kind,
            range: start..self.pos,
        });
    }

    fn run(&mut self) {
        if self.rest().starts_with("#!") {
            self.skip_line();
        }
        loop {
            self.skip_trivia();
            let Some(c) = self.peek() else { break };
            let start = self.pos;
            if is_id_start(c) || c == '\\' {
                self.scan_identifier_tail();
                let word = &self.text[start..self.pos];
                let kind = if is_keyword(word) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                };
                self.push(kind, start);
            } else if c == '#' && self.peek_at(1).is_some_and(|n| is_id_start(n) || n == '\\') {
                self.bump();
                self.scan_identifier_tail();
                self.push(TokenKind::PrivateName, start);
            } else if c.is_ascii_digit()
                || (c == '.' && self.peek_at(1).is_some_and(|n| n.is_ascii_digit()))
            {
                self.scan_number();
                self.push(TokenKind::Number, start);
            } else if c == '"' || c == '\'' {
                let ok = self.scan_string(c);
                self.push(
                    if ok {
                        TokenKind::String
                    } else {
                        TokenKind::Invalid
                    },
                    start,
                );
            } else if c == '`' {
                self.bump();
                let kind = self.scan_template_chunk();
                self.push(kind, start);
            } else if c == '}' && matches!(self.braces.last(), Some(BraceFrame::Template)) {
                self.braces.pop();
                self.bump();
                let kind = self.scan_template_chunk();
                self.push(kind, start);
            } else if c == '/' && self.regex_allowed() {
                let ok = self.scan_regex();
                self.push(
                    if ok {
                        TokenKind::RegExp
                    } else {
                        TokenKind::Invalid
                    },
                    start,
                );
            } else if let Some(len) = self.match_punct() {
                let punct = &self.text[start..start + len];
                match punct {
                    "{" => self.braces.push(BraceFrame::Block),
                    "}" => {
                        self.braces.pop();
                    }
                    _ => {}
                }
                self.pos += len;
                self.push(TokenKind::Punctuator, start);
            } else {
                self.bump();
                self.push(TokenKind::Invalid, start);
            }
        }
    }

    fn skip_line(&mut self) {
        while let Some(c) = self.peek() {
            if is_line_terminator(c) {
                break;
            }
            self.bump();
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            let rest = self.rest();
            if rest.starts_with("//") {
                self.skip_line();
            } else if let Some(body) = rest.strip_prefix("/*") {
                match body.find("*/") {
                    Some(end) => self.pos += 2 + end + 2,
                    // An unterminated block comment swallows the rest of the file.
                    None => self.pos = self.text.len(),
                }
            } else if let Some(c) = self.peek() {
                if is_whitespace(c) || is_line_terminator(c) {
                    self.bump();
                } else {
                    break;
                }
            } else {
                break;
            }
        }
    }

    fn scan_identifier_tail(&mut self) {
        // Caller guarantees the first char is a valid start or an escape.
        let mut first = true;
        while let Some(c) = self.peek() {
            if c == '\\' {
                self.bump();
                if self.peek() == Some('u') {
                    self.bump();
                    if self.peek() == Some('{') {
                        while let Some(c) = self.bump() {
                            if c == '}' {
                                break;
                            }
                        }
                    } else {
                        for _ in 0..4 {
                            if self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                                self.bump();
                            }
                        }
                    }
                }
            } else if (first && is_id_start(c)) || (!first && is_id_continue(c)) {
                self.bump();
            } else {
                break;
            }
            first = false;
        }
    }

    fn scan_number(&mut self) {
        let rest = self.rest().as_bytes();
        if rest.len() > 1
            && rest[0] == b'0'
            && matches!(rest[1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B')
        {
            self.pos += 2;
            while self
                .peek()
                .is_some_and(|c| c.is_ascii_hexdigit() || c == '_')
            {
                self.bump();
            }
        } else {
            while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
                self.bump();
            }
            if self.peek() == Some('.') {
                self.bump();
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
                    self.bump();
                }
            }
            if matches!(self.peek(), Some('e' | 'E')) {
                let sign = matches!(self.peek_at(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                    for _ in 0..digit_at {
                        self.bump();
                    }
                    while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
                        self.bump();
                    }
                }
            }
        }
        if self.peek() == Some('n') {
            self.bump();
        }
    }

    fn scan_string(&mut self, quote: char) -> bool {
        self.bump();
        while let Some(c) = self.peek() {
            if c == quote {
                self.bump();
                return true;
            }
            if c == '\\' {
                self.bump();
                if self.peek() == Some('\r') && self.peek_at(1) == Some('\n') {
                    self.bump();
                }
                self.bump();
                continue;
            }
            if c == '\n' || c == '\r' {
                return false;
            }
            self.bump();
        }
        false
    }

    /// Scans template characters after a backtick or a closing substitution
    /// brace, up to and including the closing backtick or a `${`.
    fn scan_template_chunk(&mut self) -> TokenKind {
        while let Some(c) = self.peek() {
            match c {
                '`' => {
                    self.bump();
                    return TokenKind::Template;
                }
                '\\' => {
                    self.bump();
                    self.bump();
                }
                '$' if self.peek_at(1) == Some('{') => {
                    self.pos += 2;
                    self.braces.push(BraceFrame::Template);
                    return TokenKind::Template;
                }
                _ => {
                    self.bump();
                }
            }
        }
        TokenKind::Invalid
    }

    fn scan_regex(&mut self) -> bool {
        self.bump();
        let mut in_class = false;
        loop {
            let Some(c) = self.peek() else { return false };
            if is_line_terminator(c) {
                return false;
            }
            self.bump();
            match c {
                '\\' => {
                    if self.peek().is_some_and(|c| !is_line_terminator(c)) {
                        self.bump();
                    }
                }
                '[' => in_class = true,
                ']' => in_class = false,
                '/' if !in_class => break,
                _ => {}
            }
        }
        while self.peek().is_some_and(is_id_continue) {
            self.bump();
        }
        true
    }

    fn regex_allowed(&self) -> bool {
        let Some(prev) = self.tokens.last() else {
            return true;
        };
        let text = &self.text[prev.range.clone()];
        match prev.kind {
            TokenKind::Punctuator => !matches!(text, ")" | "]" | "}" | "++" | "--"),
            TokenKind::Keyword => REGEX_AFTER_KEYWORD.contains(&text),
            TokenKind::Template => text.ends_with("${"),
            _ => false,
        }
    }

    fn match_punct(&self) -> Option<usize> {
        let rest = self.rest();
        for len in (1..=4).rev() {
            let Some(candidate) = rest.get(..len) else {
                continue;
            };
            if PUNCTUATORS.contains(&candidate) {
                // `?.` followed by a digit is a conditional, not optional chaining.
                if candidate == "?." && rest[2..].starts_with(|c: char| c.is_ascii_digit()) {
                    continue;
                }
                return Some(len);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<(&str, TokenKind)> {
        tokenize(src)
            .into_iter()
            .map(|t| (&src[t.range], t.kind))
            .collect()
    }

    #[test]
    fn declaration_tokens() {
        let toks = texts("function f(x) { return x + 1; }");
        let words: Vec<&str> = toks.iter().map(|t| t.0).collect();
        assert_eq!(
            words,
            ["function", "f", "(", "x", ")", "{", "return", "x", "+", "1", ";", "}"]
        );
        assert_eq!(toks[0].1, TokenKind::Keyword);
        assert_eq!(toks[1].1, TokenKind::Identifier);
    }

    #[test]
    fn regex_versus_division() {
        let toks = texts("a = b / c / d; r = /[/]x/gu.test(s)");
        assert!(toks
            .iter()
            .any(|t| t.0 == "/[/]x/gu" && t.1 == TokenKind::RegExp));
        assert_eq!(toks.iter().filter(|t| t.0 == "/").count(), 2);
    }

    #[test]
    fn template_with_substitutions() {
        let toks = texts("`a${ {x:1}.x }b${y}c` + 1");
        let words: Vec<&str> = toks.iter().map(|t| t.0).collect();
        assert_eq!(
            words,
            ["`a${", "{", "x", ":", "1", "}", ".", "x", "}b${", "y", "}c`", "+", "1"]
        );
    }

    #[test]
    fn comments_and_hashbang_are_trivia() {
        let toks = texts("#!/usr/bin/env node\n// c\nx /* y */ = 1");
        let words: Vec<&str> = toks.iter().map(|t| t.0).collect();
        assert_eq!(words, ["x", "=", "1"]);
    }

    #[test]
    fn numbers_and_optional_chaining() {
        let toks = texts("a?.b ? .5 : 0x1F + 1e-3 + 10n + 1_000");
        let words: Vec<&str> = toks.iter().map(|t| t.0).collect();
        assert_eq!(
            words,
            ["a", "?.", "b", "?", ".5", ":", "0x1F", "+", "1e-3", "+", "10n", "+", "1_000"]
        );
    }

    #[test]
    fn unterminated_string_is_invalid_not_fatal() {
        let toks = texts("x = 'abc\ny = 2");
        assert!(toks.iter().any(|t| t.1 == TokenKind::Invalid));
        assert!(toks.iter().any(|t| t.0 == "y"));
    }
}
