//! Packages on disk: scanning, dataset cleaning and classification.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use oxc_ast::ast::{
    CallExpression, Expression, IdentifierReference, ModuleDeclaration, StaticMemberExpression,
};
use oxc_ast_visit::{walk, Visit};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::source::SourceUnit;

pub const DEFAULT_MAX_LINES: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("{0}: no package manifest and no JavaScript sources")]
    NotAPackage(PathBuf),
    #[error("{path}: invalid package manifest: {source}")]
    BadManifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    DefinitelyTypedNoDeps,
    DefinitelyTypedWithDeps,
    NeverTypedNoDeps,
    NeverTypedWithDeps,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::DefinitelyTypedNoDeps,
        Category::DefinitelyTypedWithDeps,
        Category::NeverTypedNoDeps,
        Category::NeverTypedWithDeps,
    ];

    pub fn classify(has_declarations: bool, has_dependencies: bool) -> Category {
        match (has_declarations, has_dependencies) {
            (true, false) => Category::DefinitelyTypedNoDeps,
            (true, true) => Category::DefinitelyTypedWithDeps,
            (false, false) => Category::NeverTypedNoDeps,
            (false, true) => Category::NeverTypedWithDeps,
        }
    }

    pub fn has_ground_truth(self) -> bool {
        matches!(
            self,
            Category::DefinitelyTypedNoDeps | Category::DefinitelyTypedWithDeps
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::DefinitelyTypedNoDeps => "DefinitelyTyped, no deps",
            Category::DefinitelyTypedWithDeps => "DefinitelyTyped, with deps",
            Category::NeverTypedNoDeps => "Never typed, no deps",
            Category::NeverTypedWithDeps => "Never typed, with deps",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuleSystem {
    Commonjs,
    Esm,
    Mixed,
}

/// Which module constructs a file uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModuleSyntax {
    pub commonjs: bool,
    pub esm: bool,
}

impl ModuleSyntax {
    pub fn of(unit: &SourceUnit) -> ModuleSyntax {
        unit.with_program(|program| {
            let mut finder = ModuleSyntaxFinder::default();
            finder.visit_program(program);
            finder.found
        })
        .unwrap_or_default()
    }
}

#[derive(Default)]
struct ModuleSyntaxFinder {
    found: ModuleSyntax,
}

impl<'a> Visit<'a> for ModuleSyntaxFinder {
    fn visit_module_declaration(&mut self, it: &ModuleDeclaration<'a>) {
        self.found.esm = true;
        walk::walk_module_declaration(self, it);
    }

    fn visit_call_expression(&mut self, it: &CallExpression<'a>) {
        if matches!(&it.callee, Expression::Identifier(id) if id.name == "require") {
            self.found.commonjs = true;
        }
        walk::walk_call_expression(self, it);
    }

    fn visit_static_member_expression(&mut self, it: &StaticMemberExpression<'a>) {
        if matches!(&it.object, Expression::Identifier(id) if id.name == "module")
            && it.property.name == "exports"
        {
            self.found.commonjs = true;
        }
        walk::walk_static_member_expression(self, it);
    }

    fn visit_identifier_reference(&mut self, it: &IdentifierReference<'a>) {
        if it.name == "exports" {
            self.found.commonjs = true;
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
struct Manifest {
    name: Option<String>,
    #[serde(default)]
    dependencies: std::collections::BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct PackageUnit {
    pub name: String,
    pub root_dir: PathBuf,
    /// Every `.js`/`.mjs`/`.jsx` file outside `node_modules`, sorted by path.
    /// Files that fail to parse are kept (with their parse error) so they are
    /// counted and copied, but they are never woven.
    pub files: Vec<SourceUnit>,
    pub has_declarations: bool,
    pub has_dependencies: bool,
    pub dependencies: Vec<String>,
    pub category: Category,
    pub module_system: ModuleSystem,
}

impl PackageUnit {
    pub fn unparseable(&self) -> impl Iterator<Item = &SourceUnit> {
        self.files.iter().filter(|f| !f.parses())
    }

    pub fn total_lines(&self) -> usize {
        self.files.iter().map(SourceUnit::physical_lines).sum()
    }

    pub fn file(&self, relative_path: &str) -> Option<&SourceUnit> {
        self.files.iter().find(|f| f.relative_path == relative_path)
    }
}

pub fn is_source_path(rel: &str) -> bool {
    rel.ends_with(".js") || rel.ends_with(".mjs") || rel.ends_with(".jsx")
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn walk_package(root: &Path) -> impl Iterator<Item = walkdir::DirEntry> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            let name = e.file_name().to_string_lossy();
            e.depth() == 0 || !(name == "node_modules" || name.starts_with('.'))
        })
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
}

pub fn scan_package(
    root_dir: &Path,
    declarations_available: bool,
) -> Result<PackageUnit, ProjectError> {
    let manifest_path = root_dir.join("package.json");
    let manifest = if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        Some(serde_json::from_str::<Manifest>(&text).map_err(|source| {
            ProjectError::BadManifest {
                path: manifest_path.clone(),
                source,
            }
        })?)
    } else {
        None
    };

    let mut files = Vec::new();
    for entry in walk_package(root_dir) {
        let rel = relative(root_dir, entry.path());
        if !is_source_path(&rel) {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
        files.push(SourceUnit::new(
            rel,
            String::from_utf8_lossy(&bytes).into_owned(),
        ));
    }
    if manifest.is_none() && files.is_empty() {
        return Err(ProjectError::NotAPackage(root_dir.to_path_buf()));
    }
    let manifest = manifest.unwrap_or_default();
    let name = manifest.name.clone().unwrap_or_else(|| {
        root_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let dependencies: Vec<String> = manifest.dependencies.keys().cloned().collect();
    let has_dependencies = !dependencies.is_empty();

    let mut any_cjs = false;
    let mut any_esm = false;
    for f in files.iter().filter(|f| f.parses()) {
        let syntax = ModuleSyntax::of(f);
        any_cjs |= syntax.commonjs;
        any_esm |= syntax.esm;
    }
    let module_system = match (any_cjs, any_esm) {
        (true, true) => ModuleSystem::Mixed,
        (false, true) => ModuleSystem::Esm,
        _ => ModuleSystem::Commonjs,
    };

    Ok(PackageUnit {
        name,
        root_dir: root_dir.to_path_buf(),
        files,
        has_declarations: declarations_available,
        has_dependencies,
        dependencies,
        category: Category::classify(declarations_available, has_dependencies),
        module_system,
    })
}

const TEST_DIRS: &[&str] = &["test", "tests", "__tests__", "spec"];

/// Whether a package-relative path is test code.
pub fn is_test_path(rel: &str) -> bool {
    let mut parts: Vec<&str> = rel.split('/').collect();
    let file = parts.pop().unwrap_or_default();
    if parts.iter().any(|d| TEST_DIRS.contains(d)) {
        return true;
    }
    let Some(stem) = file.strip_suffix(".js") else {
        return false;
    };
    stem == "test"
        || stem == "tests"
        || stem.starts_with("test-")
        || stem.ends_with("-test")
        || stem.ends_with(".test")
        || stem.ends_with(".spec")
}

pub fn strip_tests(mut pkg: PackageUnit) -> PackageUnit {
    pkg.files.retain(|f| !is_test_path(&f.relative_path));
    pkg
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admission {
    pub admitted: bool,
    pub reason: Option<String>,
}

pub fn admit_package(pkg: &PackageUnit, max_lines: usize) -> Admission {
    let lines = pkg.total_lines();
    if pkg.files.is_empty() || lines == 0 {
        Admission {
            admitted: false,
            reason: Some("package does not contain code".into()),
        }
    } else if lines > max_lines {
        Admission {
            admitted: false,
            reason: Some(format!(
                "{lines} lines of code exceeds the limit of {max_lines}"
            )),
        }
    } else {
        Admission {
            admitted: true,
            reason: None,
        }
    }
}

/// One line of the admission manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub name: String,
    pub category: Category,
    pub files: usize,
    pub lines: usize,
    pub admitted: bool,
    pub reason: Option<String>,
}

impl ManifestRecord {
    pub fn new(pkg: &PackageUnit, admission: &Admission) -> Self {
        ManifestRecord {
            name: pkg.name.clone(),
            category: pkg.category,
            files: pkg.files.len(),
            lines: pkg.total_lines(),
            admitted: admission.admitted,
            reason: admission.reason.clone(),
        }
    }
}

/// Ground-truth declaration files for a package: `.d.ts` files the package
/// ships itself, or `<declarations_dir>/<name>/**/*.d.ts`.
pub fn ground_truth_declarations(
    root_dir: &Path,
    name: &str,
    declarations_dir: Option<&Path>,
) -> Vec<PathBuf> {
    let mut found: Vec<PathBuf> = walk_package(root_dir)
        .map(|e| e.into_path())
        .filter(|p| p.to_string_lossy().ends_with(".d.ts"))
        .collect();
    if found.is_empty() {
        if let Some(dir) = declarations_dir {
            let dt = dir.join(name);
            if dt.is_dir() {
                found = WalkDir::new(&dt)
                    .sort_by_file_name()
                    .into_iter()
                    .filter_map(Result::ok)
                    .map(|e| e.into_path())
                    .filter(|p| p.to_string_lossy().ends_with(".d.ts"))
                    .collect();
            }
        }
    }
    found
}

/// Package-relative paths of dependency declaration material under
/// `node_modules`: `.d.ts` files and the manifests needed to resolve them.
pub fn dependency_declarations(root_dir: &Path) -> Vec<String> {
    let modules = root_dir.join("node_modules");
    if !modules.is_dir() {
        return Vec::new();
    }
    WalkDir::new(&modules)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| relative(root_dir, e.path()))
        .filter(|rel| rel.ends_with(".d.ts") || rel.ends_with("/package.json"))
        .collect()
}

/// Copies the cleaned package (sources, manifest, dependency declarations,
/// shipped declarations) to `dest`.
pub fn write_clean_copy(pkg: &PackageUnit, dest: &Path) -> Result<(), ProjectError> {
    let keep: BTreeSet<&str> = pkg.files.iter().map(|f| f.relative_path.as_str()).collect();
    for entry in WalkDir::new(&pkg.root_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
    {
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative(&pkg.root_dir, entry.path());
        if is_source_path(&rel) && !rel.starts_with("node_modules/") && !keep.contains(rel.as_str())
        {
            continue;
        }
        if is_test_path(&rel) && !rel.starts_with("node_modules/") {
            continue;
        }
        let target = dest.join(&rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::copy(entry.path(), &target).map_err(io_err(&target))?;
    }
    Ok(())
}
