//! Recognizer for TypeScript type expressions.
//!
//! Used to validate predicted type text before it is woven into a file and to
//! find the longest syntactically valid prefix of a generated completion. The
//! grammar is deliberately conservative: anything accepted here is accepted by
//! the TypeScript parser in an annotation position, but a few rarely predicted
//! forms (template literal types, `infer`, binding patterns in function type
//! parameters, accessor signatures) are rejected.

use crate::source::lexer::{is_id_continue, is_id_start};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a type at byte {offset}: {reason}")]
pub struct TypeSyntaxError {
    pub offset: usize,
    pub reason: String,
}

/// Parses `text` as a complete type expression.
pub fn parse_type(text: &str) -> Result<(), TypeSyntaxError> {
    let tokens = scan(text)?;
    let mut p = TypeParser {
        tokens: &tokens,
        pos: 0,
        text_len: text.len(),
    };
    if p.at_end() {
        return Err(p.error("empty type"));
    }
    p.ty()?;
    if !p.at_end() {
        return Err(p.error("trailing tokens after type"));
    }
    Ok(())
}

pub fn is_type(text: &str) -> bool {
    parse_type(text).is_ok()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'s> {
    Ident(&'s str),
    Str,
    Num,
    Punct(&'static str),
}

#[derive(Debug, Clone)]
struct Lexeme<'s> {
    tok: Tok<'s>,
    offset: usize,
    newline_before: bool,
}

const PUNCT: &[&str] = &[
    "...", "=>", "(", ")", "[", "]", "{", "}", "<", ">", ",", ";", ":", "?", "|", "&", ".", "=",
    "+", "-",
];

fn scan(text: &str) -> Result<Vec<Lexeme<'_>>, TypeSyntaxError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut newline_before = false;
    'outer: while i < text.len() {
        let c = text[i..].chars().next().expect("in bounds");
        if c == '\n' || c == '\r' || c == '\u{2028}' || c == '\u{2029}' {
            newline_before = true;
            i += c.len_utf8();
            continue;
        }
        if c.is_whitespace() || c == '\u{feff}' {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        let tok = if is_id_start(c) {
            let end = text[i..]
                .char_indices()
                .find(|&(_, ch)| !is_id_continue(ch))
                .map(|(k, _)| i + k)
                .unwrap_or(text.len());
            i = end;
            Tok::Ident(&text[start..end])
        } else if c.is_ascii_digit()
            || (c == '-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
            if c == '-' {
                i += 1;
            }
            if text[i..].starts_with("0x") || text[i..].starts_with("0X") {
                i += 2;
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
            } else {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if i < bytes.len() && (is_id_start(bytes[i] as char) || bytes[i] == b'.') {
                return Err(TypeSyntaxError {
                    offset: i,
                    reason: "malformed numeric literal".into(),
                });
            }
            Tok::Num
        } else if c == '"' || c == '\'' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') | Some(b'\r') => {
                        return Err(TypeSyntaxError {
                            offset: start,
                            reason: "unterminated string".into(),
                        })
                    }
                    Some(b'\\') => i += 2,
                    Some(&b) if b == c as u8 => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            Tok::Str
        } else {
            for p in PUNCT {
                if text[i..].starts_with(p) {
                    i += p.len();
                    out.push(Lexeme {
                        tok: Tok::Punct(p),
                        offset: start,
                        newline_before,
                    });
                    newline_before = false;
                    continue 'outer;
                }
            }
            return Err(TypeSyntaxError {
                offset: start,
                reason: format!("unexpected character {c:?}"),
            });
        };
        out.push(Lexeme {
            tok,
            offset: start,
            newline_before,
        });
        newline_before = false;
    }
    Ok(out)
}

/// Words that can never name a type.
const RESERVED: &[&str] = &[
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
    "finally",
    "for",
    "function",
    "if",
    "import",
    "in",
    "instanceof",
    "new",
    "return",
    "super",
    "switch",
    "throw",
    "try",
    "var",
    "while",
    "with",
    "yield",
    "let",
    "static",
    "implements",
    "interface",
    "package",
    "private",
    "protected",
    "public",
    "await",
    "typeof",
    "keyof",
    "infer",
    "readonly",
    "unique",
    "asserts",
    "abstract",
    "is",
];

type PResult = Result<(), TypeSyntaxError>;

struct TypeParser<'t, 's> {
    tokens: &'t [Lexeme<'s>],
    pos: usize,
    text_len: usize,
}

impl<'t, 's> TypeParser<'t, 's> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok<'s>> {
        self.tokens.get(self.pos).map(|l| &l.tok)
    }

    fn peek_n(&self, n: usize) -> Option<&Tok<'s>> {
        self.tokens.get(self.pos + n).map(|l| &l.tok)
    }

    fn newline_before_current(&self) -> bool {
        self.tokens.get(self.pos).is_some_and(|l| l.newline_before)
    }

    fn error(&self, reason: &str) -> TypeSyntaxError {
        let offset = self
            .tokens
            .get(self.pos)
            .map(|l| l.offset)
            .unwrap_or(self.text_len);
        TypeSyntaxError {
            offset,
            reason: reason.to_string(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if *x == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{p}`")))
        }
    }

    fn ident_name(&mut self) -> PResult {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn binding_ident(&mut self) -> PResult {
        match self.peek() {
            Some(Tok::Ident(w)) if !RESERVED.contains(w) || *w == "is" || *w == "asserts" => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("expected binding identifier")),
        }
    }

    /// Runs `f`, rewinding on failure.
    fn attempt(&mut self, f: impl FnOnce(&mut Self) -> PResult) -> bool {
        let saved = self.pos;
        if f(self).is_ok() {
            true
        } else {
            self.pos = saved;
            false
        }
    }

    fn ty(&mut self) -> PResult {
        if (self.is_punct("<") || self.is_punct("("))
            && self.attempt(|p| p.function_type()) {
                return Ok(());
            }
        if self.is_word("new")
            || (self.is_word("abstract") && matches!(self.peek_n(1), Some(Tok::Ident("new"))))
        {
            self.eat_word("abstract");
            self.eat_word("new");
            return self.function_type();
        }
        self.conditional()
    }

    fn function_type(&mut self) -> PResult {
        if self.is_punct("<") {
            self.type_parameters()?;
        }
        self.parameters()?;
        self.expect_punct("=>")?;
        self.return_type()
    }

    fn return_type(&mut self) -> PResult {
        // `asserts x`, `asserts x is T`, `x is T`
        if self.is_word("asserts")
            && matches!(self.peek_n(1), Some(Tok::Ident(_)))
            && !self.tokens[self.pos + 1].newline_before
        {
            self.pos += 1;
            self.predicate_subject()?;
            if self.is_word("is") && !self.newline_before_current() {
                self.pos += 1;
                self.ty()?;
            }
            return Ok(());
        }
        if matches!(self.peek(), Some(Tok::Ident(_)))
            && matches!(self.peek_n(1), Some(Tok::Ident("is")))
            && !self.tokens[self.pos + 1].newline_before
        {
            self.predicate_subject()?;
            self.pos += 1;
            return self.ty();
        }
        self.ty()
    }

    fn predicate_subject(&mut self) -> PResult {
        if self.eat_word("this") {
            return Ok(());
        }
        self.binding_ident()
    }

    fn parameters(&mut self) -> PResult {
        self.expect_punct("(")?;
        while !self.is_punct(")") {
            self.eat_punct("...");
            if !self.eat_word("this") {
                self.binding_ident()?;
            }
            self.eat_punct("?");
            if self.eat_punct(":") {
                self.ty()?;
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")
    }

    fn type_parameters(&mut self) -> PResult {
        self.expect_punct("<")?;
        loop {
            self.binding_ident()?;
            if self.eat_word("extends") {
                self.ty()?;
            }
            if self.eat_punct("=") {
                self.ty()?;
            }
            if !self.eat_punct(",") {
                break;
            }
            if self.is_punct(">") {
                break;
            }
        }
        self.expect_punct(">")
    }

    fn conditional(&mut self) -> PResult {
        self.union()?;
        if self.is_word("extends") && !self.newline_before_current() {
            self.pos += 1;
            self.union()?;
            self.expect_punct("?")?;
            self.ty()?;
            self.expect_punct(":")?;
            self.ty()?;
        }
        Ok(())
    }

    fn union(&mut self) -> PResult {
        self.eat_punct("|");
        self.intersection()?;
        while self.eat_punct("|") {
            self.intersection()?;
        }
        Ok(())
    }

    fn intersection(&mut self) -> PResult {
        self.eat_punct("&");
        self.type_operator()?;
        while self.eat_punct("&") {
            self.type_operator()?;
        }
        Ok(())
    }

    fn type_operator(&mut self) -> PResult {
        if self.is_word("keyof") && self.starts_type_at(1) {
            self.pos += 1;
            return self.type_operator();
        }
        if self.is_word("unique") && matches!(self.peek_n(1), Some(Tok::Ident("symbol"))) {
            self.pos += 2;
            return Ok(());
        }
        if self.is_word("readonly") && self.starts_type_at(1) {
            self.pos += 1;
            // Only array and tuple types may be marked readonly.
            let start = self.pos;
            let suffixes = self.postfix()?;
            let punct_at = |i: usize, p: &str| matches!(self.tokens.get(i).map(|l| &l.tok), Some(Tok::Punct(q)) if *q == p);
            let array = suffixes > 0 && punct_at(self.pos - 2, "[") && punct_at(self.pos - 1, "]");
            let tuple = suffixes == 0 && punct_at(start, "[");
            return if array || tuple {
                Ok(())
            } else {
                Err(self.error("readonly on non-array type"))
            };
        }
        self.postfix().map(|_| ())
    }

    fn starts_type_at(&self, n: usize) -> bool {
        match self.peek_n(n) {
            Some(Tok::Ident(_)) | Some(Tok::Str) | Some(Tok::Num) => true,
            Some(Tok::Punct(p)) => matches!(*p, "(" | "[" | "{" | "-"),
            None => false,
        }
    }

    /// Returns the number of `[]` / `[K]` suffixes consumed.
    fn postfix(&mut self) -> Result<usize, TypeSyntaxError> {
        self.primary()?;
        let mut n = 0;
        while self.is_punct("[") && !self.newline_before_current() {
            self.pos += 1;
            if !self.eat_punct("]") {
                self.ty()?;
                self.expect_punct("]")?;
            }
            n += 1;
        }
        Ok(n)
    }

    fn primary(&mut self) -> PResult {
        match self.peek().cloned() {
            None => Err(self.error("unexpected end of type")),
            Some(Tok::Str) | Some(Tok::Num) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                self.ty()?;
                self.expect_punct(")")
            }
            Some(Tok::Punct("{")) => {
                if self.attempt(|p| p.mapped_type()) {
                    Ok(())
                } else {
                    self.object_type()
                }
            }
            Some(Tok::Punct("[")) => self.tuple_type(),
            Some(Tok::Ident("import")) if matches!(self.peek_n(1), Some(Tok::Punct("("))) => {
                self.import_type()
            }
            Some(Tok::Ident("typeof")) => {
                self.pos += 1;
                if self.is_word("import") && matches!(self.peek_n(1), Some(Tok::Punct("("))) {
                    return self.import_type();
                }
                self.entity_name()?;
                if self.is_punct("<") && !self.newline_before_current() {
                    self.type_arguments()?;
                }
                Ok(())
            }
            Some(Tok::Ident("this"))
            | Some(Tok::Ident("void"))
            | Some(Tok::Ident("null"))
            | Some(Tok::Ident("true"))
            | Some(Tok::Ident("false")) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Ident(_)) => {
                self.entity_name()?;
                if self.is_punct("<") && !self.newline_before_current() {
                    self.type_arguments()?;
                }
                Ok(())
            }
            Some(Tok::Punct(_)) => Err(self.error("expected a type")),
        }
    }

    /// `import("m")`, optionally qualified and with type arguments.
    fn import_type(&mut self) -> PResult {
        self.pos += 1;
        self.expect_punct("(")?;
        match self.peek() {
            Some(Tok::Str) => self.pos += 1,
            _ => return Err(self.error("expected a module specifier")),
        }
        self.expect_punct(")")?;
        while self.eat_punct(".") {
            self.ident_name()?;
        }
        if self.is_punct("<") && !self.newline_before_current() {
            self.type_arguments()?;
        }
        Ok(())
    }

    fn entity_name(&mut self) -> PResult {
        self.binding_ident()?;
        while self.is_punct(".") {
            self.pos += 1;
            self.ident_name()?;
        }
        Ok(())
    }

    fn type_arguments(&mut self) -> PResult {
        self.expect_punct("<")?;
        self.ty()?;
        while self.eat_punct(",") {
            if self.is_punct(">") {
                break;
            }
            self.ty()?;
        }
        self.expect_punct(">")
    }

    fn tuple_type(&mut self) -> PResult {
        self.expect_punct("[")?;
        while !self.is_punct("]") {
            let spread = self.eat_punct("...");
            let named = matches!(self.peek(), Some(Tok::Ident(_)))
                && (matches!(self.peek_n(1), Some(Tok::Punct(":")))
                    || (matches!(self.peek_n(1), Some(Tok::Punct("?")))
                        && matches!(self.peek_n(2), Some(Tok::Punct(":")))));
            if named {
                self.binding_ident()?;
                if !spread {
                    self.eat_punct("?");
                }
                self.expect_punct(":")?;
                self.ty()?;
            } else {
                self.ty()?;
                if !spread {
                    self.eat_punct("?");
                }
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("]")
    }

    fn mapped_type(&mut self) -> PResult {
        self.expect_punct("{")?;
        if self.eat_punct("+") || self.eat_punct("-") {
            if !self.eat_word("readonly") {
                return Err(self.error("expected readonly"));
            }
        } else {
            self.eat_word("readonly");
        }
        self.expect_punct("[")?;
        self.binding_ident()?;
        if !self.eat_word("in") {
            return Err(self.error("expected in"));
        }
        self.ty()?;
        if self.eat_word("as") {
            self.ty()?;
        }
        self.expect_punct("]")?;
        if self.eat_punct("+") || self.eat_punct("-") {
            self.expect_punct("?")?;
        } else {
            self.eat_punct("?");
        }
        if self.eat_punct(":") {
            self.ty()?;
        }
        let _ = self.eat_punct(";") || self.eat_punct(",");
        self.expect_punct("}")
    }

    fn object_type(&mut self) -> PResult {
        self.expect_punct("{")?;
        loop {
            if self.eat_punct("}") {
                return Ok(());
            }
            self.type_member()?;
            let separated = self.eat_punct(",") || self.eat_punct(";");
            if !separated && !self.is_punct("}") && !self.newline_before_current() {
                return Err(self.error("expected `,` or `;` between members"));
            }
        }
    }

    fn type_member(&mut self) -> PResult {
        // call and construct signatures
        if self.is_punct("(") || self.is_punct("<") {
            return self.signature_tail();
        }
        if self.is_word("new") && matches!(self.peek_n(1), Some(Tok::Punct("(" | "<"))) {
            self.pos += 1;
            return self.signature_tail();
        }
        // readonly modifier vs. a member called `readonly`
        if self.is_word("readonly")
            && !matches!(
                self.peek_n(1),
                Some(Tok::Punct(":" | "?" | "(" | "," | ";" | "}" | "<")) | None
            )
        {
            self.pos += 1;
        }
        // index signature: [k: string]: T
        if self.is_punct("[")
            && matches!(self.peek_n(1), Some(Tok::Ident(_)))
            && matches!(self.peek_n(2), Some(Tok::Punct(":")))
        {
            self.pos += 1;
            self.binding_ident()?;
            self.expect_punct(":")?;
            self.ty()?;
            self.expect_punct("]")?;
            return self.type_annotation();
        }
        self.property_name()?;
        self.eat_punct("?");
        if self.is_punct("(") || self.is_punct("<") {
            return self.signature_tail();
        }
        if self.eat_punct(":") {
            self.ty()?;
        }
        Ok(())
    }

    fn property_name(&mut self) -> PResult {
        match self.peek() {
            Some(Tok::Ident(_)) | Some(Tok::Str) | Some(Tok::Num) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Punct("[")) => {
                self.pos += 1;
                self.entity_name()?;
                self.expect_punct("]")
            }
            _ => Err(self.error("expected property name")),
        }
    }

    fn signature_tail(&mut self) -> PResult {
        if self.is_punct("<") {
            self.type_parameters()?;
        }
        self.parameters()?;
        if self.eat_punct(":") {
            self.return_type()?;
        }
        Ok(())
    }

    fn type_annotation(&mut self) -> PResult {
        self.expect_punct(":")?;
        self.ty()
    }
}
