//! Function signatures from declaration files and their comparison.

use std::collections::BTreeMap;
use std::path::Path;

use oxc_ast::ast::{
    BindingPattern, Declaration, ExportDefaultDeclarationKind, FormalParameters, Function, Program,
    Statement, TSSignature, TSType, TSTypeAnnotation, VariableDeclaration,
};
use oxc_span::GetSpan;
use serde::{Deserialize, Serialize};

use crate::source::{with_program, Dialect, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SignatureRecord {
    pub function_name: String,
    /// (parameter name, type text)
    pub param_types: Vec<(String, String)>,
    pub return_type: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccuracyCount {
    pub compared: usize,
    pub matched: usize,
    pub skipped_any_ground_truth: usize,
    pub skipped_absent: usize,
    /// Signatures whose parameter counts differ.
    pub arity_mismatches: usize,
}

impl AccuracyCount {
    pub fn add(&mut self, other: &AccuracyCount) {
        self.compared += other.compared;
        self.matched += other.matched;
        self.skipped_any_ground_truth += other.skipped_any_ground_truth;
        self.skipped_absent += other.skipped_absent;
        self.arity_mismatches += other.arity_mismatches;
    }

    pub fn rate(&self) -> Option<f64> {
        (self.compared > 0).then(|| self.matched as f64 / self.compared as f64)
    }
}

/// Collapses whitespace runs to single spaces and drops `readonly`
/// modifiers.
pub fn normalize_type_text(text: &str) -> String {
    text.split_whitespace()
        .filter(|w| *w != "readonly")
        .collect::<Vec<_>>()
        .join(" ")
}

fn annotation_text(text: &str, ann: Option<&TSTypeAnnotation<'_>>) -> Option<String> {
    ann.map(|a| {
        let s = a.type_annotation.span();
        normalize_type_text(&text[s.start as usize..s.end as usize])
    })
}

fn params_of(text: &str, params: &FormalParameters<'_>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = params
        .items
        .iter()
        .map(|p| {
            let name = match &p.pattern {
                BindingPattern::BindingIdentifier(id) => id.name.to_string(),
                other => {
                    let s = other.span();
                    text[s.start as usize..s.end as usize].to_string()
                }
            };
            let ty = annotation_text(text, p.type_annotation.as_deref())
                .unwrap_or_else(|| "any".to_string());
            (name, ty)
        })
        .collect();
    if let Some(rest) = &params.rest {
        let name = match &rest.rest.argument {
            BindingPattern::BindingIdentifier(id) => id.name.to_string(),
            other => {
                let s = other.span();
                text[s.start as usize..s.end as usize].to_string()
            }
        };
        let ty = annotation_text(text, rest.type_annotation.as_deref())
            .unwrap_or_else(|| "any[]".to_string());
        out.push((name, ty));
    }
    out
}

fn function_record(text: &str, name: String, f: &Function<'_>) -> SignatureRecord {
    SignatureRecord {
        function_name: name,
        param_types: params_of(text, &f.params),
        return_type: annotation_text(text, f.return_type.as_deref()),
    }
}

fn function_type_record(text: &str, name: String, ty: &TSType<'_>) -> Option<SignatureRecord> {
    match ty {
        TSType::TSFunctionType(ft) => Some(SignatureRecord {
            function_name: name,
            param_types: params_of(text, &ft.params),
            return_type: {
                let s = ft.return_type.type_annotation.span();
                Some(normalize_type_text(&text[s.start as usize..s.end as usize]))
            },
        }),
        TSType::TSParenthesizedType(p) => function_type_record(text, name, &p.type_annotation),
        TSType::TSTypeLiteral(lit) => lit.members.iter().find_map(|m| match m {
            TSSignature::TSCallSignatureDeclaration(call) => Some(SignatureRecord {
                function_name: name.clone(),
                param_types: params_of(text, &call.params),
                return_type: annotation_text(text, call.return_type.as_deref()),
            }),
            _ => None,
        }),
        _ => None,
    }
}

fn variable_records(text: &str, v: &VariableDeclaration<'_>, out: &mut Vec<SignatureRecord>) {
    for d in &v.declarations {
        if let (BindingPattern::BindingIdentifier(id), Some(ann)) = (&d.id, &d.type_annotation) {
            if let Some(r) = function_type_record(text, id.name.to_string(), &ann.type_annotation) {
                out.push(r);
            }
        }
    }
}

fn declaration_records(text: &str, decl: &Declaration<'_>, out: &mut Vec<SignatureRecord>) {
    match decl {
        Declaration::FunctionDeclaration(f) => {
            if let Some(id) = &f.id {
                out.push(function_record(text, id.name.to_string(), f));
            }
        }
        Declaration::VariableDeclaration(v) => variable_records(text, v, out),
        _ => {}
    }
}

fn program_records(text: &str, program: &Program<'_>) -> Vec<SignatureRecord> {
    let mut out = Vec::new();
    for stmt in &program.body {
        match stmt {
            Statement::ExportDeclaration(e) => declaration_records(text, &e.declaration, &mut out),
            Statement::ExportDefaultDeclaration(e) => {
                if let ExportDefaultDeclarationKind::FunctionDeclaration(f) = &e.declaration {
                    let name =
                        f.id.as_ref()
                            .map(|id| id.name.to_string())
                            .unwrap_or_else(|| "default".into());
                    out.push(function_record(text, name, f));
                }
            }
            other => {
                if let Some(decl) = other.as_declaration() {
                    declaration_records(text, decl, &mut out);
                }
            }
        }
    }
    out
}

/// Top-level function signatures of declaration-file text: function
/// declarations and variables whose type is a function type.
pub fn extract_signatures(text: &str) -> Result<Vec<SignatureRecord>, ParseError> {
    with_program(text, Dialect::Declaration, |program| {
        program_records(text, program)
    })
}

/// Signatures of several declaration files, in the given order. Files that do
/// not parse are skipped.
pub fn extract_signatures_from_files(paths: &[impl AsRef<Path>]) -> Vec<SignatureRecord> {
    let mut out = Vec::new();
    for p in paths {
        if let Ok(text) = std::fs::read_to_string(p.as_ref()) {
            if let Ok(records) = extract_signatures(&text) {
                out.extend(records);
            }
        }
    }
    out
}

/// Compares signatures present on both sides by name.
///
/// Ground-truth overloads: the first one counts. Generated duplicates: the
/// least record in the derived order counts, so the outcome does not depend
/// on the order of `generated`.
pub fn compare_signatures(
    ground_truth: &[SignatureRecord],
    generated: &[SignatureRecord],
) -> AccuracyCount {
    let mut truth: BTreeMap<&str, &SignatureRecord> = BTreeMap::new();
    for s in ground_truth {
        truth.entry(&s.function_name).or_insert(s);
    }
    let mut ours: BTreeMap<&str, &SignatureRecord> = BTreeMap::new();
    for s in generated {
        ours.entry(&s.function_name)
            .and_modify(|cur| *cur = (*cur).min(s))
            .or_insert(s);
    }
    let mut count = AccuracyCount::default();
    for (name, t) in &truth {
        let Some(g) = ours.get(name) else { continue };
        let common = t.param_types.len().min(g.param_types.len());
        if t.param_types.len() != g.param_types.len() {
            count.arity_mismatches += 1;
            count.skipped_absent += t.param_types.len().max(g.param_types.len()) - common;
        }
        let pairs = t.param_types[..common]
            .iter()
            .map(|(_, ty)| Some(ty.as_str()))
            .zip(
                g.param_types[..common]
                    .iter()
                    .map(|(_, ty)| Some(ty.as_str())),
            )
            .chain(std::iter::once((
                t.return_type.as_deref(),
                g.return_type.as_deref(),
            )));
        for (truth_ty, gen_ty) in pairs {
            match (truth_ty, gen_ty) {
                (Some("any"), _) => count.skipped_any_ground_truth += 1,
                (Some(a), Some(b)) => {
                    count.compared += 1;
                    if a == b {
                        count.matched += 1;
                    }
                }
                _ => count.skipped_absent += 1,
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(name: &str, params: &[&str], ret: Option<&str>) -> SignatureRecord {
        SignatureRecord {
            function_name: name.into(),
            param_types: params
                .iter()
                .enumerate()
                .map(|(i, t)| (format!("p{i}"), t.to_string()))
                .collect(),
            return_type: ret.map(str::to_string),
        }
    }

    #[test]
    fn extraction() {
        let text = "export declare function read(buffer: Uint8Array, offset?: number, ...rest: readonly  string[]): number;\n\
                    export declare const write: (buffer: Buffer, value: number) => void;\n\
                    declare function helper(x): void;\n\
                    declare function helper(x: string, y: string): void;\n\
                    export default function (thing: string): any;\n\
                    declare class C { m(a: string): void }\n";
        let sigs = extract_signatures(text).unwrap();
        let names: Vec<&str> = sigs.iter().map(|s| s.function_name.as_str()).collect();
        assert_eq!(names, ["read", "write", "helper", "helper", "default"]);
        assert_eq!(
            sigs[0].param_types,
            [
                ("buffer".to_string(), "Uint8Array".to_string()),
                ("offset".to_string(), "number".to_string()),
                ("rest".to_string(), "string[]".to_string())
            ]
        );
        assert_eq!(sigs[1].return_type.as_deref(), Some("void"));
        assert_eq!(sigs[2].param_types[0].1, "any");
    }

    #[test]
    fn comparison_rules() {
        let truth = [
            sig("write", &["Uint8Array", "number"], Some("void")),
            sig("f", &["any"], Some("string")),
            sig("u", &["string | number"], None),
            sig("only_truth", &["string"], None),
        ];
        let generated = [
            sig("write", &["Buffer", "number"], Some("void")),
            sig("f", &["string"], Some("string")),
            sig("u", &["number | string", "boolean"], Some("void")),
        ];
        let c = compare_signatures(&truth, &generated);
        assert_eq!(c.compared, 5);
        assert_eq!(c.matched, 3);
        assert_eq!(c.skipped_any_ground_truth, 1);
        // `u`: one extra generated parameter, and no ground-truth return type.
        assert_eq!(c.skipped_absent, 2);
        assert_eq!(c.arity_mismatches, 1);
    }

    #[test]
    fn first_ground_truth_overload_counts() {
        let truth = [
            sig("f", &["string"], Some("void")),
            sig("f", &["number"], Some("void")),
        ];
        let c = compare_signatures(&truth, &[sig("f", &["number"], Some("void"))]);
        assert_eq!((c.compared, c.matched), (2, 1));
    }
}
