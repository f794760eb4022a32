//! CommonJS to ECMAScript module conversion.
//!
//! Only statically recognizable patterns at the top level are rewritten:
//! `module.exports.NAME = EXPR`, `exports.NAME = EXPR`, `module.exports =
//! EXPR`, and `require` of a string literal bound by a top-level `var`,
//! destructured, or used as a bare statement. Any other use of `require`,
//! `module` or `exports` marks the file as dynamically loading modules; such a
//! file is emitted unchanged.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::Path;

use oxc_allocator::Allocator;
use oxc_ast::ast::{
    Argument, AssignmentExpression, AssignmentOperator, AssignmentTarget, BindingIdentifier,
    BindingPattern, CallExpression, Declaration, Expression, IdentifierReference, ImportExpression,
    ModuleExportName, Program, PropertyKey, Statement, StaticMemberExpression, StringLiteral,
    UnaryExpression, UnaryOperator, UpdateExpression, VariableDeclaration,
};
use oxc_ast_visit::{walk, Visit};
use oxc_parser::Parser;
use oxc_span::{GetSpan, SourceType};
use serde::{Deserialize, Serialize};

use crate::project::{scan_package, write_clean_copy, PackageUnit, ProjectError};
use crate::source::{lexer, SourceUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConversionStatus {
    Converted,
    AlreadyEsm,
    SkippedDynamic,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConversionOutcome {
    pub file: String,
    pub status: ConversionStatus,
    /// Present for converted files only.
    #[serde(skip)]
    pub rewritten_text: Option<String>,
    /// Path of the file in the converted package.
    pub output_file: String,
    pub notes: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConvertError {
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Whether `text` parses as an ECMAScript module.
pub fn parses_as_module(text: &str) -> bool {
    let allocator = Allocator::default();
    let ret = Parser::new(&allocator, text, SourceType::mjs()).parse();
    !ret.diagnostics.has_errors() && !ret.fatal_error
}

/// What importers can rely on from a module.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ExportShape {
    named: BTreeSet<String>,
    has_default: bool,
    /// `export * from` makes the named set open-ended.
    open: bool,
}

/// What a `require`d specifier resolves to.
#[derive(Debug, Clone)]
enum Target {
    /// A bare specifier or a file outside the package: assumed CommonJS,
    /// importable by name or by default.
    External,
    /// A package file that will be an ECMAScript module after conversion.
    LocalModule(ExportShape),
    /// A package file that stays CommonJS.
    LocalScript,
}

/// Converts a single file, treating every `require`d module as external.
pub fn convert_file(unit: &SourceUnit) -> ConversionOutcome {
    let analysis = analyze(unit);
    render(unit, &analysis, &|_| Target::External)
}

// ---------------------------------------------------------------------------
// Analysis

#[derive(Debug, Clone)]
enum RequireBinding {
    /// `var X = require('M')`
    Whole { local: String },
    /// `var {a, b: c} = require('M')`
    Destructured { pairs: Vec<(String, String)> },
    /// `var x = require('M').foo`
    Member { imported: String, local: String },
    /// `require('M');`
    Bare,
}

#[derive(Debug, Clone)]
struct RequireSite {
    binding: RequireBinding,
    specifier_raw: String,
    specifier: String,
}

#[derive(Debug, Clone)]
enum TopLevelEdit {
    /// A `var`/`let`/`const` statement made only of requires, or a bare
    /// require statement.
    Requires {
        stmt: Range<usize>,
        sites: Vec<RequireSite>,
    },
    ExportName {
        stmt: Range<usize>,
        name: String,
        rhs: Range<usize>,
        rhs_is_same_binding: bool,
    },
    ExportDefault {
        stmt: Range<usize>,
        rhs: Range<usize>,
    },
    ReExport {
        stmt: Range<usize>,
        specifier_raw: String,
        specifier: String,
    },
}

#[derive(Debug, Clone, Default)]
struct Analysis {
    edits: Vec<TopLevelEdit>,
    dynamic: Vec<String>,
    uses_commonjs: bool,
    parse_error: Option<String>,
    /// For ECMAScript input: the shape it exports.
    esm_shape: ExportShape,
    /// Every reference by name: (span of the identifier, enclosing static
    /// member access if the identifier is its object).
    references: HashMap<String, Vec<Reference>>,
    binding_counts: HashMap<String, usize>,
    top_level_names: HashSet<String>,
    /// Names that appear anywhere as identifiers.
    names_in_use: HashSet<String>,
}

#[derive(Debug, Clone)]
struct Reference {
    /// Member access `X.P` with X being this reference: (range, P).
    member: Option<(Range<usize>, String)>,
}

impl Analysis {
    /// The export shape after conversion.
    fn shape(&self) -> ExportShape {
        let mut shape = self.esm_shape.clone();
        for e in &self.edits {
            match e {
                TopLevelEdit::ExportName { name, .. } if name == "default" => {
                    shape.has_default = true
                }
                TopLevelEdit::ExportName { name, .. } => {
                    shape.named.insert(name.clone());
                }
                TopLevelEdit::ExportDefault { .. } => shape.has_default = true,
                TopLevelEdit::ReExport { .. } => {
                    shape.open = true;
                    shape.has_default = true;
                }
                TopLevelEdit::Requires { .. } => {}
            }
        }
        shape
    }

    fn is_convertible(&self) -> bool {
        self.parse_error.is_none() && self.dynamic.is_empty() && self.uses_commonjs
    }
}

fn range(span: oxc_span::Span) -> Range<usize> {
    span.start as usize..span.end as usize
}

/// Reference and binding inventory of a whole program.
#[derive(Default)]
struct Inventory {
    refs: Vec<(String, Range<usize>)>,
    members: HashMap<usize, (Range<usize>, String, bool)>,
    write_targets: HashSet<(usize, usize)>,
    bindings: Vec<String>,
    esm: ExportShape,
    has_module_syntax: bool,
    dynamic_imports: usize,
}

impl<'a> Visit<'a> for Inventory {
    fn visit_identifier_reference(&mut self, it: &IdentifierReference<'a>) {
        self.refs.push((it.name.to_string(), range(it.span)));
    }

    fn visit_binding_identifier(&mut self, it: &BindingIdentifier<'a>) {
        self.bindings.push(it.name.to_string());
    }

    fn visit_static_member_expression(&mut self, it: &StaticMemberExpression<'a>) {
        if let Expression::Identifier(id) = &it.object {
            self.members.insert(
                id.span.start as usize,
                (range(it.span), it.property.name.to_string(), it.optional),
            );
        }
        walk::walk_static_member_expression(self, it);
    }

    fn visit_assignment_expression(&mut self, it: &AssignmentExpression<'a>) {
        let s = it.left.span();
        self.write_targets
            .insert((s.start as usize, s.end as usize));
        walk::walk_assignment_expression(self, it);
    }

    fn visit_update_expression(&mut self, it: &UpdateExpression<'a>) {
        let s = it.argument.span();
        self.write_targets
            .insert((s.start as usize, s.end as usize));
        walk::walk_update_expression(self, it);
    }

    fn visit_unary_expression(&mut self, it: &UnaryExpression<'a>) {
        if it.operator == UnaryOperator::Delete {
            let s = it.argument.span();
            self.write_targets
                .insert((s.start as usize, s.end as usize));
        }
        walk::walk_unary_expression(self, it);
    }

    fn visit_import_expression(&mut self, it: &ImportExpression<'a>) {
        self.dynamic_imports += 1;
        walk::walk_import_expression(self, it);
    }
}

fn string_literal_argument<'a, 'b>(call: &'b CallExpression<'a>) -> Option<&'b StringLiteral<'a>> {
    if !matches!(&call.callee, Expression::Identifier(id) if id.name == "require") || call.optional
    {
        return None;
    }
    match call.arguments.as_slice() {
        [Argument::StringLiteral(s)] => Some(s),
        _ => None,
    }
}

fn require_call<'a, 'b>(
    e: &'b Expression<'a>,
) -> Option<(&'b CallExpression<'a>, &'b StringLiteral<'a>)> {
    match e.without_parentheses() {
        Expression::CallExpression(call) => string_literal_argument(call).map(|s| (&**call, s)),
        _ => None,
    }
}

/// `module.exports` or `module.exports.NAME` / `exports.NAME`.
enum ExportsTarget {
    Whole { module_ref: usize },
    Name { name: String, base_ref: usize },
}

fn exports_target(t: &AssignmentTarget<'_>) -> Option<ExportsTarget> {
    let AssignmentTarget::StaticMemberExpression(m) = t else {
        return None;
    };
    if m.optional {
        return None;
    }
    match &m.object {
        Expression::Identifier(id) if id.name == "module" && m.property.name == "exports" => {
            Some(ExportsTarget::Whole {
                module_ref: id.span.start as usize,
            })
        }
        Expression::Identifier(id) if id.name == "exports" => Some(ExportsTarget::Name {
            name: m.property.name.to_string(),
            base_ref: id.span.start as usize,
        }),
        Expression::StaticMemberExpression(inner)
            if !inner.optional && inner.property.name == "exports" =>
        {
            match &inner.object {
                Expression::Identifier(id) if id.name == "module" => Some(ExportsTarget::Name {
                    name: m.property.name.to_string(),
                    base_ref: id.span.start as usize,
                }),
                _ => None,
            }
        }
        _ => None,
    }
}

fn collect_top_level_names(program: &Program<'_>, names: &mut HashSet<String>) {
    for stmt in &program.body {
        let decl: Option<&Declaration<'_>> = match stmt {
            Statement::ExportDeclaration(e) => Some(&e.declaration),
            _ => stmt.as_declaration(),
        };
        if let Some(decl) = decl {
            match decl {
                Declaration::VariableDeclaration(v) => {
                    for d in &v.declarations {
                        names.extend(
                            d.id.get_binding_identifiers()
                                .iter()
                                .map(|b| b.name.to_string()),
                        );
                    }
                }
                Declaration::FunctionDeclaration(f) => {
                    names.extend(f.id.as_ref().map(|b| b.name.to_string()))
                }
                Declaration::ClassDeclaration(c) => {
                    names.extend(c.id.as_ref().map(|b| b.name.to_string()))
                }
                _ => {}
            }
        }
        if let Statement::ImportDeclaration(i) = stmt {
            for s in i.specifiers.iter().flatten() {
                names.insert(s.local().name.to_string());
            }
        }
    }
}

fn esm_shape(program: &Program<'_>) -> (ExportShape, bool) {
    let mut shape = ExportShape::default();
    let mut any = false;
    for stmt in &program.body {
        match stmt {
            Statement::ImportDeclaration(_) => any = true,
            Statement::ExportDeclaration(e) => {
                any = true;
                {
                    match &e.declaration {
                        Declaration::VariableDeclaration(v) => {
                            for d in &v.declarations {
                                shape.named.extend(
                                    d.id.get_binding_identifiers()
                                        .iter()
                                        .map(|b| b.name.to_string()),
                                );
                            }
                        }
                        Declaration::FunctionDeclaration(f) => shape
                            .named
                            .extend(f.id.as_ref().map(|b| b.name.to_string())),
                        Declaration::ClassDeclaration(c) => shape
                            .named
                            .extend(c.id.as_ref().map(|b| b.name.to_string())),
                        _ => {}
                    }
                }
            }
            Statement::ExportNamedDeclaration(e) => {
                any = true;
                for s in &e.specifiers {
                    let name = s.exported.name().to_string();
                    if name == "default" {
                        shape.has_default = true;
                    } else {
                        shape.named.insert(name);
                    }
                }
            }
            Statement::ExportFromDeclaration(e) => {
                any = true;
                for s in &e.specifiers {
                    let name = s.exported.name().to_string();
                    if name == "default" {
                        shape.has_default = true;
                    } else {
                        shape.named.insert(name);
                    }
                }
            }
            Statement::ExportDefaultDeclaration(_) => {
                any = true;
                shape.has_default = true;
            }
            Statement::ExportAllDeclaration(e) => {
                any = true;
                match &e.exported {
                    Some(ModuleExportName::IdentifierName(n)) => {
                        shape.named.insert(n.name.to_string());
                    }
                    Some(other) => {
                        shape.named.insert(other.name().to_string());
                    }
                    None => shape.open = true,
                }
            }
            _ => {}
        }
    }
    (shape, any)
}

fn analyze(unit: &SourceUnit) -> Analysis {
    let mut analysis = Analysis::default();
    let result = unit.with_program(|program| {
        let mut inv = Inventory::default();
        inv.visit_program(program);
        let (shape, has_module_syntax) = esm_shape(program);
        inv.esm = shape;
        inv.has_module_syntax = has_module_syntax;
        collect_top_level_names(program, &mut analysis.top_level_names);
        let mut claimed: HashSet<usize> = HashSet::new();
        scan_top_level(program, &unit.text, &mut analysis, &mut claimed);
        (inv, claimed)
    });
    let (inv, claimed) = match result {
        Ok(r) => r,
        Err(e) => {
            analysis.parse_error = Some(e.message);
            return analysis;
        }
    };

    for (name, r) in &inv.refs {
        if matches!(name.as_str(), "require" | "module" | "exports") {
            analysis.uses_commonjs = true;
            if !claimed.contains(&r.start) {
                let pos = unit.position(r.start);
                analysis.dynamic.push(format!(
                    "`{name}` used dynamically at {}:{}",
                    pos.line, pos.column
                ));
            }
        }
    }
    for name in &inv.bindings {
        *analysis.binding_counts.entry(name.clone()).or_default() += 1;
        if matches!(name.as_str(), "require" | "module" | "exports") {
            analysis.dynamic.push(format!("`{name}` is rebound"));
        }
    }
    analysis
        .names_in_use
        .extend(inv.refs.iter().map(|(n, _)| n.clone()));
    analysis.names_in_use.extend(inv.bindings.iter().cloned());
    for (name, r) in &inv.refs {
        let member = inv
            .members
            .get(&r.start)
            .filter(|(m, _, optional)| !optional && !inv.write_targets.contains(&(m.start, m.end)))
            .map(|(m, p, _)| (m.clone(), p.clone()));
        analysis
            .references
            .entry(name.clone())
            .or_default()
            .push(Reference { member });
    }
    analysis.esm_shape = inv.esm;

    let defaults = analysis
        .edits
        .iter()
        .filter(|e| {
            matches!(
                e,
                TopLevelEdit::ExportDefault { .. } | TopLevelEdit::ReExport { .. }
            ) || matches!(e, TopLevelEdit::ExportName { name, .. } if name == "default")
        })
        .count();
    if defaults > 1 {
        analysis
            .dynamic
            .push("`module.exports` is assigned more than once".into());
    }
    analysis
}

fn scan_top_level(
    program: &Program<'_>,
    text: &str,
    analysis: &mut Analysis,
    claimed: &mut HashSet<usize>,
) {
    for stmt in &program.body {
        match stmt {
            Statement::ExpressionStatement(es) => {
                let stmt_range = range(es.span);
                match &es.expression {
                    Expression::AssignmentExpression(a)
                        if a.operator == AssignmentOperator::Assign =>
                    {
                        match exports_target(&a.left) {
                            Some(ExportsTarget::Whole { module_ref }) => {
                                claimed.insert(module_ref);
                                if let Some((call, spec)) = require_call(&a.right) {
                                    claimed.insert(call.callee.span().start as usize);
                                    analysis.edits.push(TopLevelEdit::ReExport {
                                        stmt: stmt_range,
                                        specifier_raw: text[range(spec.span)].to_string(),
                                        specifier: spec.value.to_string(),
                                    });
                                } else {
                                    analysis.edits.push(TopLevelEdit::ExportDefault {
                                        stmt: stmt_range,
                                        rhs: range(a.right.span()),
                                    });
                                }
                            }
                            Some(ExportsTarget::Name { name, base_ref }) => {
                                claimed.insert(base_ref);
                                let rhs_is_same_binding = matches!(a.right.without_parentheses(), Expression::Identifier(id) if id.name == name.as_str());
                                analysis.edits.push(TopLevelEdit::ExportName {
                                    stmt: stmt_range,
                                    name,
                                    rhs: range(a.right.span()),
                                    rhs_is_same_binding,
                                });
                            }
                            None => {}
                        }
                    }
                    Expression::CallExpression(call) => {
                        if let Some(spec) = string_literal_argument(call) {
                            claimed.insert(call.callee.span().start as usize);
                            analysis.edits.push(TopLevelEdit::Requires {
                                stmt: stmt_range,
                                sites: vec![RequireSite {
                                    binding: RequireBinding::Bare,
                                    specifier_raw: text[range(spec.span)].to_string(),
                                    specifier: spec.value.to_string(),
                                }],
                            });
                        }
                    }
                    _ => {}
                }
            }
            Statement::VariableDeclaration(v) => {
                scan_require_declaration(v, text, analysis, claimed)
            }
            _ => {}
        }
    }
}

fn scan_require_declaration(
    v: &VariableDeclaration<'_>,
    text: &str,
    analysis: &mut Analysis,
    claimed: &mut HashSet<usize>,
) {
    let mut sites = Vec::new();
    let mut callees = Vec::new();
    for d in &v.declarations {
        let Some(init) = &d.init else { return };
        let (call, spec, member) = match init.without_parentheses() {
            Expression::StaticMemberExpression(m) if !m.optional => match require_call(&m.object) {
                Some((call, spec)) => (call, spec, Some(m.property.name.to_string())),
                None => return,
            },
            other => match require_call(other) {
                Some((call, spec)) => (call, spec, None),
                None => return,
            },
        };
        let binding = match (&d.id, member) {
            (BindingPattern::BindingIdentifier(id), None) => RequireBinding::Whole {
                local: id.name.to_string(),
            },
            (BindingPattern::BindingIdentifier(id), Some(imported)) => RequireBinding::Member {
                imported,
                local: id.name.to_string(),
            },
            (BindingPattern::ObjectPattern(obj), None) if obj.rest.is_none() => {
                let mut pairs = Vec::new();
                for p in &obj.properties {
                    let (
                        PropertyKey::StaticIdentifier(key),
                        BindingPattern::BindingIdentifier(local),
                    ) = (&p.key, &p.value)
                    else {
                        return;
                    };
                    if p.computed {
                        return;
                    }
                    pairs.push((key.name.to_string(), local.name.to_string()));
                }
                RequireBinding::Destructured { pairs }
            }
            _ => return,
        };
        callees.push(call.callee.span().start as usize);
        sites.push(RequireSite {
            binding,
            specifier_raw: text[range(spec.span)].to_string(),
            specifier: spec.value.to_string(),
        });
    }
    claimed.extend(callees);
    analysis.edits.push(TopLevelEdit::Requires {
        stmt: range(v.span),
        sites,
    });
}

// ---------------------------------------------------------------------------
// Rendering

const STRICT_RESERVED: &[&str] = &[
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
    "arguments",
    "eval",
];

fn is_binding_name(name: &str) -> bool {
    let mut chars = name.chars();
    chars.next().is_some_and(lexer::is_id_start)
        && chars.all(lexer::is_id_continue)
        && !STRICT_RESERVED.contains(&name)
}

fn export_alias(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if lexer::is_id_continue(c) { c } else { '_' })
        .collect();
    format!("__export_{cleaned}")
}

fn render(
    unit: &SourceUnit,
    analysis: &Analysis,
    resolve: &dyn Fn(&str) -> Target,
) -> ConversionOutcome {
    let mut outcome = ConversionOutcome {
        file: unit.relative_path.clone(),
        status: ConversionStatus::AlreadyEsm,
        rewritten_text: None,
        output_file: unit.relative_path.clone(),
        notes: Vec::new(),
    };
    if let Some(e) = &analysis.parse_error {
        outcome.status = ConversionStatus::Failed;
        outcome.notes.push(format!("does not parse: {e}"));
        return outcome;
    }
    if !analysis.dynamic.is_empty() {
        outcome.status = ConversionStatus::SkippedDynamic;
        outcome.notes = analysis.dynamic.clone();
        return outcome;
    }
    if !analysis.uses_commonjs {
        return outcome;
    }

    let text = &unit.text;
    let mut edits: Vec<(Range<usize>, String)> = Vec::new();
    let mut introduced: HashSet<String> = HashSet::new();
    let mut exported_once: HashMap<String, String> = HashMap::new();
    // Rewrites of `local.prop` to `prop`; those inside an exported
    // expression are applied to that expression instead.
    let mut member_edits: Vec<(Range<usize>, String)> = Vec::new();

    for edit in &analysis.edits {
        if let TopLevelEdit::Requires { stmt, sites } = edit {
            let mut lines = Vec::new();
            for site in sites {
                lines.push(render_require(
                    site,
                    analysis,
                    resolve,
                    &mut introduced,
                    &mut member_edits,
                ));
            }
            edits.push((stmt.clone(), lines.join("\n")));
        }
    }

    for edit in &analysis.edits {
        match edit {
            TopLevelEdit::Requires { .. } => {}
            TopLevelEdit::ExportName {
                stmt,
                name,
                rhs,
                rhs_is_same_binding,
            } => {
                let expr = &rewrite_within(text, rhs, &mut member_edits);
                let replacement = if let Some(local) = exported_once.get(name) {
                    format!("{local} = {expr};")
                } else if *rhs_is_same_binding && analysis.top_level_names.contains(name) {
                    exported_once.insert(name.clone(), name.clone());
                    format!("export {{ {name} }};")
                } else if is_binding_name(name)
                    && !analysis.top_level_names.contains(name)
                    && !introduced.contains(name)
                {
                    exported_once.insert(name.clone(), name.clone());
                    format!("export var {name} = {expr};")
                } else {
                    let alias = export_alias(name);
                    exported_once.insert(name.clone(), alias.clone());
                    format!("var {alias} = {expr};\nexport {{ {alias} as {name} }};")
                };
                edits.push((stmt.clone(), replacement));
            }
            TopLevelEdit::ExportDefault { stmt, rhs } => {
                edits.push((
                    stmt.clone(),
                    format!(
                        "export default {};",
                        rewrite_within(text, rhs, &mut member_edits)
                    ),
                ));
            }
            TopLevelEdit::ReExport {
                stmt,
                specifier_raw,
                specifier,
            } => {
                let has_default = match resolve(specifier) {
                    Target::External | Target::LocalScript => true,
                    Target::LocalModule(shape) => shape.has_default,
                };
                let mut s = format!("export * from {specifier_raw};");
                if has_default {
                    s.push_str(&format!("\nexport {{ default }} from {specifier_raw};"));
                }
                edits.push((stmt.clone(), s));
            }
        }
    }

    edits.append(&mut member_edits);
    edits.sort_by_key(|e| std::cmp::Reverse(e.0.start));
    let mut out = text.clone();
    for (r, replacement) in edits {
        out.replace_range(r, &replacement);
    }
    if parses_as_module(&out) {
        outcome.status = ConversionStatus::Converted;
        outcome.output_file = module_path(&unit.relative_path);
        outcome.rewritten_text = Some(out);
    } else {
        outcome.status = ConversionStatus::Failed;
        outcome
            .notes
            .push("rewritten text does not parse as a module".into());
    }
    outcome
}

/// The text of `range` with the edits that fall inside it applied; those
/// edits are removed from `edits`.
fn rewrite_within(
    text: &str,
    range: &Range<usize>,
    edits: &mut Vec<(Range<usize>, String)>,
) -> String {
    let (mut inner, rest): (Vec<_>, Vec<_>) = edits
        .drain(..)
        .partition(|(r, _)| r.start >= range.start && r.end <= range.end);
    *edits = rest;
    inner.sort_by_key(|e| std::cmp::Reverse(e.0.start));
    let mut out = text[range.clone()].to_string();
    for (r, replacement) in inner {
        out.replace_range(r.start - range.start..r.end - range.start, &replacement);
    }
    out
}

fn render_require(
    site: &RequireSite,
    analysis: &Analysis,
    resolve: &dyn Fn(&str) -> Target,
    introduced: &mut HashSet<String>,
    edits: &mut Vec<(Range<usize>, String)>,
) -> String {
    let spec = &site.specifier_raw;
    let target = resolve(&site.specifier);
    match &site.binding {
        RequireBinding::Bare => format!("import {spec};"),
        RequireBinding::Destructured { pairs } => {
            let names: Vec<String> = pairs
                .iter()
                .map(|(k, l)| {
                    if k == l {
                        k.clone()
                    } else {
                        format!("{k} as {l}")
                    }
                })
                .collect();
            format!("import {{{}}} from {spec};", names.join(","))
        }
        RequireBinding::Member { imported, local } => {
            if imported == local {
                format!("import {{{imported}}} from {spec};")
            } else {
                format!("import {{{imported} as {local}}} from {spec};")
            }
        }
        RequireBinding::Whole { local } => {
            let refs = analysis
                .references
                .get(local)
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            if refs.is_empty() {
                return format!("import {spec};");
            }
            if let Some(props) = named_import_candidates(local, refs, analysis, &target, introduced)
            {
                for r in refs {
                    let (m, p) = r
                        .member
                        .as_ref()
                        .expect("checked by named_import_candidates");
                    edits.push((m.clone(), p.clone()));
                }
                introduced.extend(props.iter().cloned());
                return format!("import {{{}}} from {spec};", props.join(","));
            }
            match target {
                Target::LocalModule(shape) if !shape.has_default => {
                    format!("import * as {local} from {spec};")
                }
                _ => format!("import {local} from {spec};"),
            }
        }
    }
}

/// Property names to import by name, if every use of `local` is a static
/// property read and the names can become bindings without clashes.
fn named_import_candidates(
    local: &str,
    refs: &[Reference],
    analysis: &Analysis,
    target: &Target,
    introduced: &HashSet<String>,
) -> Option<Vec<String>> {
    if analysis.binding_counts.get(local).copied().unwrap_or(0) != 1 {
        return None;
    }
    let mut props: Vec<String> = Vec::new();
    for r in refs {
        let (_, p) = r.member.as_ref()?;
        if !props.contains(p) {
            props.push(p.clone());
        }
    }
    for p in &props {
        if !is_binding_name(p) || analysis.names_in_use.contains(p) || introduced.contains(p) {
            return None;
        }
    }
    match target {
        Target::External => Some(props),
        Target::LocalScript => None,
        Target::LocalModule(shape) => {
            (shape.open || props.iter().all(|p| shape.named.contains(p))).then_some(props)
        }
    }
}

// ---------------------------------------------------------------------------
// Packages

/// `.js` files become `.mjs`.
pub fn module_path(path: &str) -> String {
    match path.strip_suffix(".js") {
        Some(stem) => format!("{stem}.mjs"),
        None => path.to_string(),
    }
}

fn normalize_join(dir: &str, spec: &str) -> Option<String> {
    let mut parts: Vec<&str> = if dir.is_empty() {
        Vec::new()
    } else {
        dir.split('/').collect()
    };
    for seg in spec.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop()?;
            }
            s => parts.push(s),
        }
    }
    Some(parts.join("/"))
}

fn parent_dir(path: &str) -> &str {
    path.rfind('/').map(|k| &path[..k]).unwrap_or("")
}

/// The package file a relative specifier refers to, if any.
fn resolve_local(from: &str, spec: &str, files: &BTreeSet<String>) -> Option<String> {
    if !(spec.starts_with("./") || spec.starts_with("../") || spec == "." || spec == "..") {
        return None;
    }
    let base = normalize_join(parent_dir(from), spec)?;
    let prefix = if base.is_empty() {
        String::new()
    } else {
        format!("{base}/")
    };
    [
        base.clone(),
        format!("{base}.js"),
        format!("{base}.mjs"),
        format!("{prefix}index.js"),
        format!("{prefix}index.mjs"),
    ]
    .into_iter()
    .find(|c| files.contains(c))
}

fn relative_specifier(from: &str, to: &str) -> String {
    let from_dir: Vec<&str> = parent_dir(from)
        .split('/')
        .filter(|s| !s.is_empty())
        .collect();
    let to_parts: Vec<&str> = to.split('/').collect();
    let common = from_dir
        .iter()
        .zip(&to_parts)
        .take_while(|(a, b)| a == b)
        .count();
    let ups = from_dir.len() - common;
    let rest = to_parts[common..].join("/");
    if ups == 0 {
        format!("./{rest}")
    } else {
        format!("{}{rest}", "../".repeat(ups))
    }
}

/// Rewrites string-literal module specifiers of import/export declarations
/// and dynamic imports that resolve to renamed files.
fn rewrite_specifiers(
    path: &str,
    text: &str,
    files: &BTreeSet<String>,
    renamed: &BTreeMap<String, String>,
) -> String {
    #[derive(Default)]
    struct Sources(Vec<(Range<usize>, String)>);
    impl<'a> Visit<'a> for Sources {
        fn visit_import_declaration(&mut self, it: &oxc_ast::ast::ImportDeclaration<'a>) {
            self.0
                .push((range(it.source.span), it.source.value.to_string()));
        }
        fn visit_export_from_declaration(&mut self, it: &oxc_ast::ast::ExportFromDeclaration<'a>) {
            self.0
                .push((range(it.source.span), it.source.value.to_string()));
        }
        fn visit_export_all_declaration(&mut self, it: &oxc_ast::ast::ExportAllDeclaration<'a>) {
            self.0
                .push((range(it.source.span), it.source.value.to_string()));
        }
        fn visit_import_expression(&mut self, it: &ImportExpression<'a>) {
            if let Expression::StringLiteral(s) = &it.source {
                self.0.push((range(s.span), s.value.to_string()));
            }
            walk::walk_import_expression(self, it);
        }
    }
    let allocator = Allocator::default();
    let ret = Parser::new(&allocator, text, SourceType::mjs()).parse();
    if ret.diagnostics.has_errors() || ret.fatal_error {
        return text.to_string();
    }
    let mut sources = Sources::default();
    sources.visit_program(&ret.program);
    let mut edits: Vec<(Range<usize>, String)> = Vec::new();
    for (r, spec) in sources.0 {
        let Some(target) = resolve_local(path, &spec, files) else {
            continue;
        };
        let Some(new_target) = renamed.get(&target) else {
            continue;
        };
        let new_path = renamed.get(path).map(String::as_str).unwrap_or(path);
        let quote = &text[r.start..r.start + 1];
        edits.push((
            r,
            format!("{quote}{}{quote}", relative_specifier(new_path, new_target)),
        ));
    }
    edits.sort_by_key(|e| std::cmp::Reverse(e.0.start));
    let mut out = text.to_string();
    for (r, s) in edits {
        out.replace_range(r, &s);
    }
    out
}

/// A converted package.
#[derive(Debug)]
pub struct ConvertedPackage {
    pub package: PackageUnit,
    pub outcomes: Vec<ConversionOutcome>,
}

/// Converts each file of `pkg` and writes the converted package to `out`.
/// The original tree is not modified.
pub fn convert_package(pkg: &PackageUnit, out: &Path) -> Result<ConvertedPackage, ConvertError> {
    let files: BTreeSet<String> = pkg.files.iter().map(|f| f.relative_path.clone()).collect();
    let analyses: Vec<Analysis> = pkg.files.iter().map(analyze).collect();
    let shapes: HashMap<&str, (bool, ExportShape)> = pkg
        .files
        .iter()
        .zip(&analyses)
        .map(|(f, a)| {
            let becomes_module =
                a.is_convertible() || (a.parse_error.is_none() && !a.uses_commonjs);
            (f.relative_path.as_str(), (becomes_module, a.shape()))
        })
        .collect();

    let mut outcomes = Vec::new();
    for (unit, analysis) in pkg.files.iter().zip(&analyses) {
        let resolve = |spec: &str| match resolve_local(&unit.relative_path, spec, &files) {
            None => Target::External,
            Some(target) => match shapes.get(target.as_str()) {
                Some((true, shape)) => Target::LocalModule(shape.clone()),
                _ => Target::LocalScript,
            },
        };
        outcomes.push(render(unit, analysis, &resolve));
    }

    let renamed: BTreeMap<String, String> = outcomes
        .iter()
        .filter(|o| o.output_file != o.file)
        .map(|o| (o.file.clone(), o.output_file.clone()))
        .collect();

    write_clean_copy(pkg, out)?;
    for (unit, outcome) in pkg.files.iter().zip(&mut outcomes) {
        let text = match outcome.status {
            ConversionStatus::Converted | ConversionStatus::AlreadyEsm => {
                let base = outcome.rewritten_text.as_deref().unwrap_or(&unit.text);
                let rewritten = rewrite_specifiers(&unit.relative_path, base, &files, &renamed);
                if outcome.status == ConversionStatus::Converted {
                    outcome.rewritten_text = Some(rewritten.clone());
                }
                rewritten
            }
            _ => unit.text.clone(),
        };
        if outcome.output_file != outcome.file {
            let old = out.join(&outcome.file);
            if old.exists() {
                fs::remove_file(&old).map_err(|source| ConvertError::Io {
                    path: old.clone(),
                    source,
                })?;
            }
        }
        let target = out.join(&outcome.output_file);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|source| ConvertError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&target, text).map_err(|source| ConvertError::Io {
            path: target.clone(),
            source,
        })?;
    }

    let package = scan_package(out, pkg.has_declarations)?;
    Ok(ConvertedPackage { package, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convert(src: &str) -> ConversionOutcome {
        convert_file(&SourceUnit::new("a.js", src))
    }

    #[test]
    fn member_reads_inside_exported_expressions() {
        let o = convert("var path = require('path');\nmodule.exports.sep = path.sep;\nmodule.exports.j = path.join;\n");
        assert_eq!(o.status, ConversionStatus::Converted);
        assert_eq!(
            o.rewritten_text.as_deref(),
            Some("import {sep,join} from 'path';\nvar __export_sep = sep;\nexport { __export_sep as sep };\nexport var j = join;\n")
        );
    }

    #[test]
    fn named_exports_become_export_var() {
        let o = convert("var x = 2;    // private\n\nmodule.exports.foo = 42;\nmodule.exports.f = (i) => i+x;\n");
        assert_eq!(o.status, ConversionStatus::Converted);
        assert_eq!(
            o.rewritten_text.unwrap(),
            "var x = 2;    // private\n\nexport var foo = 42;\nexport var f = (i) => i+x;\n"
        );
        assert_eq!(o.output_file, "a.mjs");
    }

    #[test]
    fn require_with_property_uses_becomes_named_import() {
        let o = convert(
            "var a = require('./a.js');\n\nconsole.log(a.foo);  // 42\nconsole.log(a.f(1)); // 3\n",
        );
        assert_eq!(
            o.rewritten_text.unwrap(),
            "import {foo,f} from './a.js';\n\nconsole.log(foo);  // 42\nconsole.log(f(1)); // 3\n"
        );
    }

    #[test]
    fn require_used_whole_becomes_default_import() {
        let o = convert("const path = require('path');\nmodule.exports = path;\n");
        assert_eq!(
            o.rewritten_text.unwrap(),
            "import path from 'path';\nexport default path;\n"
        );
        let o = convert("var m = require('m');\nm.x = 1;\n");
        assert_eq!(o.rewritten_text.unwrap(), "import m from 'm';\nm.x = 1;\n");
    }

    #[test]
    fn destructuring_member_and_bare_requires() {
        let o =
            convert("var {a, b: c} = require('m');\nconst d = require('n').d;\nrequire('side');\n");
        assert_eq!(
            o.rewritten_text.unwrap(),
            "import {a,b as c} from 'm';\nimport {d} from 'n';\nimport 'side';\n"
        );
    }

    #[test]
    fn dynamic_requires_are_skipped() {
        for src in [
            "var m = require(pathVar);",
            "function f() { return require('x'); }",
            "if (c) module.exports.x = 1;",
            "module.exports = 1; module.exports = 2;",
            "var load = require; load('x');",
        ] {
            let o = convert(src);
            assert_eq!(o.status, ConversionStatus::SkippedDynamic, "{src}");
            assert!(o.rewritten_text.is_none());
            assert_eq!(o.output_file, "a.js");
        }
    }

    #[test]
    fn esm_input_is_left_alone() {
        let o = convert("import x from 'y';\nexport const z = x;\n");
        assert_eq!(o.status, ConversionStatus::AlreadyEsm);
        assert_eq!(o.output_file, "a.js");
    }

    #[test]
    fn export_name_collisions() {
        let o = convert("function foo() {}\nmodule.exports.foo = foo;\nconst bar = 1;\nexports.bar = 2;\nexports.bar = 3;\n");
        assert_eq!(
            o.rewritten_text.unwrap(),
            "function foo() {}\nexport { foo };\nconst bar = 1;\nvar __export_bar = 2;\nexport { __export_bar as bar };\n__export_bar = 3;\n"
        );
        let o = convert("module.exports.default = 1;");
        assert_eq!(
            o.rewritten_text.unwrap(),
            "var __export_default = 1;\nexport { __export_default as default };"
        );
    }

    #[test]
    fn reexport_of_external_module() {
        let o = convert("module.exports = require('./impl');\n");
        assert_eq!(
            o.rewritten_text.unwrap(),
            "export * from './impl';\nexport { default } from './impl';\n"
        );
    }

    #[test]
    fn specifier_helpers() {
        let files: BTreeSet<String> = ["a.js", "lib/index.js", "lib/b.js"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            resolve_local("x.js", "./a", &files).as_deref(),
            Some("a.js")
        );
        assert_eq!(
            resolve_local("x.js", "./lib", &files).as_deref(),
            Some("lib/index.js")
        );
        assert_eq!(
            resolve_local("lib/b.js", "../a.js", &files).as_deref(),
            Some("a.js")
        );
        assert_eq!(resolve_local("x.js", "lodash", &files), None);
        assert_eq!(relative_specifier("lib/b.mjs", "a.mjs"), "../a.mjs");
        assert_eq!(
            relative_specifier("b.mjs", "lib/index.mjs"),
            "./lib/index.mjs"
        );
    }
}
