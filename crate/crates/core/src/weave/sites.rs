//! Annotation sites: the slots where a type annotation may be inserted.

use std::collections::HashSet;
use std::ops::Range;

use oxc_ast::ast::{
    ArrowFunctionExpression, BindingPattern, ForInStatement, ForOfStatement, ForStatementLeft,
    FormalParameter, FormalParameters, Function, MethodDefinition, MethodDefinitionKind,
    ObjectProperty, PropertyKey, PropertyKind, TSTypeAnnotation, VariableDeclaration,
    VariableDeclarator,
};
use oxc_ast_visit::{walk, Visit};
use oxc_span::GetSpan;
use oxc_syntax::scope::ScopeFlags;
use serde::{Deserialize, Serialize};

use crate::source::{ParseError, SourceUnit, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    VariableDeclaration,
    FunctionParameter,
    FunctionResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotationSite {
    pub kind: SiteKind,
    /// Absent for results of anonymous functions.
    pub identifier: Option<String>,
    /// Span of the identifier, or a zero-width span at the slot for
    /// anonymous results.
    pub span: Span,
    /// Token texts of the enclosing declaration header, e.g.
    /// `["function", "f", "(", "x", ")"]` or `["const", "f"]`.
    pub declaration_tokens: Vec<String>,
    /// Byte offset at which `: T` is inserted.
    pub insert_at: usize,
    /// Sites of one declaration header share a header index.
    pub header: usize,
    /// Byte range of the header in the source.
    pub header_range: Range<usize>,
    /// Position of the identifier within `declaration_tokens`.
    pub identifier_index: Option<usize>,
    /// Byte range of the parenthesized parameter list of the function the
    /// site belongs to, if any.
    pub parameter_list: Option<Range<usize>>,
}

/// All unannotated sites of a parsed unit, in source order.
pub fn collect_sites(unit: &SourceUnit) -> Result<Vec<AnnotationSite>, ParseError> {
    let raw = unit.with_program(|program| {
        let mut c = SiteCollector::new(&unit.text);
        c.visit_program(program);
        c.sites
    })?;
    let mut sites: Vec<AnnotationSite> = raw.into_iter().map(|r| r.finish(unit)).collect();
    sites.sort_by_key(|s| (s.span.start, s.insert_at, s.kind));
    Ok(sites)
}

/// A site before token information is attached.
struct RawSite {
    kind: SiteKind,
    identifier: Option<(String, Range<usize>)>,
    insert_at: usize,
    header: usize,
    header_range: Range<usize>,
    parameter_list: Option<Range<usize>>,
}

impl RawSite {
    fn finish(self, unit: &SourceUnit) -> AnnotationSite {
        let first = unit.token_index_at(self.header_range.start);
        let last = unit.token_index_at(self.header_range.end);
        let header_tokens = &unit.tokens()[first..last];
        let identifier_index = self
            .identifier
            .as_ref()
            .and_then(|(_, r)| header_tokens.iter().position(|t| t.range.start == r.start));
        let span = match &self.identifier {
            Some((_, r)) => unit.span_of(r.clone()),
            None => unit.span_of(self.insert_at..self.insert_at),
        };
        AnnotationSite {
            kind: self.kind,
            identifier: self.identifier.map(|(name, _)| name),
            span,
            declaration_tokens: header_tokens.iter().map(|t| t.text.clone()).collect(),
            insert_at: self.insert_at,
            header: self.header,
            header_range: self.header_range,
            identifier_index,
            parameter_list: self.parameter_list,
        }
    }
}

#[derive(Clone, Copy)]
enum Callable {
    Plain,
    Getter,
    Setter,
    Constructor,
}

struct MethodContext {
    function_start: u32,
    kind: Callable,
    header_start: usize,
    name: Option<(String, Range<usize>)>,
}

struct SiteCollector<'t> {
    text: &'t str,
    sites: Vec<RawSite>,
    next_header: usize,
    excluded_declarations: HashSet<u32>,
    pending_method: Option<MethodContext>,
}

fn range(span: oxc_span::Span) -> Range<usize> {
    span.start as usize..span.end as usize
}

impl<'t> SiteCollector<'t> {
    fn new(text: &'t str) -> Self {
        SiteCollector {
            text,
            sites: Vec::new(),
            next_header: 0,
            excluded_declarations: HashSet::new(),
            pending_method: None,
        }
    }

    fn header_id(&mut self) -> usize {
        self.next_header += 1;
        self.next_header - 1
    }

    fn parenthesized(&self, params: &FormalParameters<'_>) -> bool {
        let r = range(params.span);
        self.text[r.clone()].starts_with('(') && self.text[r].ends_with(')')
    }

    /// Records parameter and result sites of one function-like node.
    fn function_like(
        &mut self,
        header_start: usize,
        header_end: usize,
        name: Option<(String, Range<usize>)>,
        params: &FormalParameters<'_>,
        has_return_type: bool,
        callable: Callable,
    ) {
        if !self.parenthesized(params) {
            return;
        }
        let header = self.header_id();
        let header_range = header_start..header_end;
        let parameter_list = range(params.span);
        for param in &params.items {
            if let Some((name, r)) = simple_parameter(param) {
                self.sites.push(RawSite {
                    kind: SiteKind::FunctionParameter,
                    identifier: Some((name, r.clone())),
                    insert_at: r.end,
                    header,
                    header_range: header_range.clone(),
                    parameter_list: Some(parameter_list.clone()),
                });
            }
        }
        if !has_return_type && !matches!(callable, Callable::Setter | Callable::Constructor) {
            self.sites.push(RawSite {
                kind: SiteKind::FunctionResult,
                identifier: name,
                insert_at: parameter_list.end,
                header,
                header_range,
                parameter_list: Some(parameter_list),
            });
        }
    }
}

fn simple_parameter(param: &FormalParameter<'_>) -> Option<(String, Range<usize>)> {
    // Optional parameters (including those with default values) are skipped.
    if param.type_annotation.is_some() || param.optional || param.initializer.is_some() {
        return None;
    }
    match &param.pattern {
        BindingPattern::BindingIdentifier(id) => Some((id.name.to_string(), range(id.span))),
        _ => None,
    }
}

fn key_name(key: &PropertyKey<'_>) -> Option<(String, Range<usize>)> {
    match key {
        PropertyKey::StaticIdentifier(id) => Some((id.name.to_string(), range(id.span))),
        _ => None,
    }
}

impl<'a> Visit<'a> for SiteCollector<'_> {
    fn visit_for_in_statement(&mut self, it: &ForInStatement<'a>) {
        if let ForStatementLeft::VariableDeclaration(decl) = &it.left {
            self.excluded_declarations.insert(decl.span.start);
        }
        walk::walk_for_in_statement(self, it);
    }

    fn visit_for_of_statement(&mut self, it: &ForOfStatement<'a>) {
        if let ForStatementLeft::VariableDeclaration(decl) = &it.left {
            self.excluded_declarations.insert(decl.span.start);
        }
        walk::walk_for_of_statement(self, it);
    }

    fn visit_variable_declaration(&mut self, it: &VariableDeclaration<'a>) {
        // Statements declaring several variables are skipped.
        if !it.declare
            && it.declarations.len() == 1
            && !self.excluded_declarations.contains(&it.span.start)
        {
            let d: &VariableDeclarator<'a> = &it.declarations[0];
            if let (BindingPattern::BindingIdentifier(id), None) = (&d.id, &d.type_annotation) {
                let header = self.header_id();
                self.sites.push(RawSite {
                    kind: SiteKind::VariableDeclaration,
                    identifier: Some((id.name.to_string(), range(id.span))),
                    insert_at: id.span.end as usize,
                    header,
                    header_range: it.span.start as usize..id.span.end as usize,
                    parameter_list: None,
                });
            }
        }
        walk::walk_variable_declaration(self, it);
    }

    fn visit_method_definition(&mut self, it: &MethodDefinition<'a>) {
        let kind = match it.kind {
            MethodDefinitionKind::Constructor => Callable::Constructor,
            MethodDefinitionKind::Method => Callable::Plain,
            MethodDefinitionKind::Get => Callable::Getter,
            MethodDefinitionKind::Set => Callable::Setter,
        };
        self.pending_method = Some(MethodContext {
            function_start: it.value.span.start,
            kind,
            header_start: it.key.span().start as usize,
            name: if it.computed { None } else { key_name(&it.key) },
        });
        walk::walk_method_definition(self, it);
    }

    fn visit_object_property(&mut self, it: &ObjectProperty<'a>) {
        if it.method || it.kind != PropertyKind::Init {
            let kind = match it.kind {
                PropertyKind::Get => Callable::Getter,
                PropertyKind::Set => Callable::Setter,
                PropertyKind::Init => Callable::Plain,
            };
            self.pending_method = Some(MethodContext {
                function_start: it.value.span().start,
                kind,
                header_start: it.key.span().start as usize,
                name: if it.computed { None } else { key_name(&it.key) },
            });
        }
        walk::walk_object_property(self, it);
    }

    fn visit_function(&mut self, it: &Function<'a>, flags: ScopeFlags) {
        let method = self
            .pending_method
            .take_if(|m| m.function_start == it.span.start);
        let (header_start, name, kind) = match method {
            Some(m) => (m.header_start, m.name, m.kind),
            None => (
                it.span.start as usize,
                it.id
                    .as_ref()
                    .map(|id| (id.name.to_string(), range(id.span))),
                Callable::Plain,
            ),
        };
        if !it.declare && it.body.is_some() {
            let params_end = it.params.span.end as usize;
            self.function_like(
                header_start,
                params_end,
                name,
                &it.params,
                it.return_type.is_some(),
                kind,
            );
        }
        walk::walk_function(self, it, flags);
    }

    fn visit_arrow_function_expression(&mut self, it: &ArrowFunctionExpression<'a>) {
        let params_end = it.params.span.end as usize;
        // The header runs through the `=>` token.
        let header_end = self.text[params_end..]
            .find("=>")
            .map(|k| params_end + k + 2)
            .unwrap_or(params_end);
        self.function_like(
            it.span.start as usize,
            header_end,
            None,
            &it.params,
            it.return_type.is_some(),
            Callable::Plain,
        );
        walk::walk_arrow_function_expression(self, it);
    }
}

/// An annotation present in (woven) TypeScript source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentAnnotation {
    pub kind: SiteKind,
    pub type_text: String,
    /// Byte range of the annotation including its leading colon.
    #[serde(skip)]
    pub range: Range<usize>,
}

/// Annotations on variable declarations, parameters and function results.
pub fn present_annotations(unit: &SourceUnit) -> Result<Vec<PresentAnnotation>, ParseError> {
    let mut found = unit.with_program(|program| {
        let mut c = AnnotationCollector {
            text: &unit.text,
            found: Vec::new(),
        };
        c.visit_program(program);
        c.found
    })?;
    found.sort_by_key(|a| a.range.start);
    Ok(found)
}

struct AnnotationCollector<'t> {
    text: &'t str,
    found: Vec<PresentAnnotation>,
}

impl AnnotationCollector<'_> {
    fn push(&mut self, kind: SiteKind, ann: &TSTypeAnnotation<'_>) {
        let ty = ann.type_annotation.span();
        self.found.push(PresentAnnotation {
            kind,
            type_text: self.text[range(ty)].to_string(),
            range: range(ann.span),
        });
    }
}

impl<'a> Visit<'a> for AnnotationCollector<'_> {
    fn visit_variable_declarator(&mut self, it: &VariableDeclarator<'a>) {
        if let Some(ann) = &it.type_annotation {
            self.push(SiteKind::VariableDeclaration, ann);
        }
        walk::walk_variable_declarator(self, it);
    }

    fn visit_formal_parameter(&mut self, it: &FormalParameter<'a>) {
        if let Some(ann) = &it.type_annotation {
            self.push(SiteKind::FunctionParameter, ann);
        }
        walk::walk_formal_parameter(self, it);
    }

    fn visit_function(&mut self, it: &Function<'a>, flags: ScopeFlags) {
        if let Some(ann) = &it.return_type {
            self.push(SiteKind::FunctionResult, ann);
        }
        walk::walk_function(self, it, flags);
    }

    fn visit_arrow_function_expression(&mut self, it: &ArrowFunctionExpression<'a>) {
        if let Some(ann) = &it.return_type {
            self.push(SiteKind::FunctionResult, ann);
        }
        walk::walk_arrow_function_expression(self, it);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(src: &str) -> Vec<(SiteKind, Option<String>)> {
        let unit = SourceUnit::new("a.js", src);
        collect_sites(&unit)
            .unwrap()
            .into_iter()
            .map(|s| (s.kind, s.identifier))
            .collect()
    }

    #[test]
    fn arrow_assigned_to_const() {
        use SiteKind::*;
        assert_eq!(
            summary("const f = (a, b) => a"),
            vec![
                (VariableDeclaration, Some("f".into())),
                (FunctionParameter, Some("a".into())),
                (FunctionParameter, Some("b".into())),
                (FunctionResult, None),
            ]
        );
    }

    #[test]
    fn multi_declarations_optional_params_and_loop_heads_are_skipped() {
        assert!(summary("var x = 1, y = 2;").is_empty());
        assert_eq!(
            summary("function f(a = 1, {b}, ...c) {}"),
            vec![(SiteKind::FunctionResult, Some("f".into()))]
        );
        assert!(summary("for (var k in o) {} for (const v of xs) {}").is_empty());
        // Unparenthesized arrow parameters cannot take an annotation in place.
        assert!(summary("xs.map(x => x)").is_empty());
    }

    #[test]
    fn annotated_typescript_has_no_sites() {
        let unit = SourceUnit::new(
            "a.ts",
            "const f: F = (a: number): number => a; function g(x: string): void {}",
        );
        assert!(collect_sites(&unit).unwrap().is_empty());
    }

    #[test]
    fn methods_getters_setters_constructors() {
        use SiteKind::*;
        let got = summary("class C { constructor(a) {} get v() { return 1 } set v(x) {} m(y) {} }");
        assert_eq!(
            got,
            vec![
                (FunctionParameter, Some("a".into())),
                (FunctionResult, Some("v".into())),
                (FunctionParameter, Some("x".into())),
                (FunctionResult, Some("m".into())),
                (FunctionParameter, Some("y".into())),
            ]
        );
    }

    #[test]
    fn declaration_tokens_cover_the_header() {
        let unit = SourceUnit::new(
            "a.js",
            "function f(x) { return x; }\nconst g = function (y, z) {};",
        );
        let sites = collect_sites(&unit).unwrap();
        assert_eq!(
            sites[0].declaration_tokens,
            ["function", "f", "(", "x", ")"]
        );
        assert_eq!(sites[0].identifier_index, Some(1));
        assert_eq!(sites[1].identifier_index, Some(3));
        let g = sites
            .iter()
            .find(|s| s.identifier.as_deref() == Some("g"))
            .unwrap();
        assert_eq!(g.declaration_tokens, ["const", "g"]);
        let z = sites
            .iter()
            .find(|s| s.identifier.as_deref() == Some("z"))
            .unwrap();
        assert_eq!(z.declaration_tokens, ["function", "(", "y", ",", "z", ")"]);
    }

    #[test]
    fn present_annotations_are_found() {
        let unit = SourceUnit::new(
            "a.ts",
            "const f: Function = (a: any[]): void => {}; function g(x: any) {}",
        );
        let got: Vec<String> = present_annotations(&unit)
            .unwrap()
            .into_iter()
            .map(|a| a.type_text)
            .collect();
        assert_eq!(got, ["Function", "any[]", "void", "any"]);
    }
}
