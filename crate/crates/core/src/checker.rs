//! Running the TypeScript compiler over a migrated package.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

/// The compiler flags used for every package.
pub const DEFAULT_FLAGS: [&str; 5] = [
    "--noEmit",
    "--esModuleInterop",
    "--moduleResolution node",
    "--target es6",
    "--lib es2021,dom",
];

/// Environment variable naming the compiler executable.
pub const COMPILER_ENV: &str = "TYPELOOM_TSC";

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error("compiler not found at {0}")]
    CompilerNotFound(PathBuf),
    #[error("compiler timed out after {0:?}")]
    Timeout(Duration),
    #[error("{0} contains no TypeScript files")]
    NotAPackage(PathBuf),
    #[error("compiler failed without diagnostics (exit {code:?}): {output}")]
    CompilerFailed { code: Option<i32>, output: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct CompileConfig {
    /// Flag strings; a flag and its value may share one entry.
    pub flags: Vec<String>,
    pub compiler_path: PathBuf,
    pub timeout_secs: u64,
    /// A directory of declaration packages (laid out like
    /// `node_modules/@types`) made visible to every checked package.
    #[serde(default)]
    pub ambient_types: Option<PathBuf>,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            flags: DEFAULT_FLAGS.iter().map(|f| f.to_string()).collect(),
            compiler_path: std::env::var_os(COMPILER_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| "tsc".into()),
            timeout_secs: 600,
            ambient_types: None,
        }
    }
}

impl CompileConfig {
    fn arguments(&self) -> Vec<String> {
        self.flags
            .iter()
            .flat_map(|f| f.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Absent for global diagnostics such as configuration errors.
    pub file: Option<String>,
    pub line: u32,
    pub column: u32,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckResult {
    pub package: String,
    pub diagnostics: Vec<Diagnostic>,
    pub files_checked: usize,
    pub error_free_files: usize,
    pub type_checks: bool,
    pub declarations_dir: Option<PathBuf>,
    pub compiler_version: Option<String>,
    /// Output lines that are not diagnostics.
    pub raw_log: Vec<String>,
}

impl CheckResult {
    /// Diagnostic counts per error code.
    pub fn code_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.diagnostics {
            *counts.entry(d.code.clone()).or_default() += 1;
        }
        counts
    }

    /// Checked files with no diagnostics.
    pub fn error_free(files: &[String], diagnostics: &[Diagnostic]) -> usize {
        let bad: BTreeSet<&str> = diagnostics
            .iter()
            .filter_map(|d| d.file.as_deref())
            .collect();
        files.iter().filter(|f| !bad.contains(f.as_str())).count()
    }
}

fn diagnostic_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(.+)\((\d+),(\d+)\): error (TS\d+): (.*)$").expect("valid regex")
    })
}

fn global_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^error (TS\d+): (.*)$").expect("valid regex"))
}

/// Parses plain (non-pretty) compiler output. Indented lines following a
/// diagnostic continue its message; every other non-diagnostic line goes to
/// the raw log.
pub fn parse_diagnostics(output: &str) -> (Vec<Diagnostic>, Vec<String>) {
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut raw = Vec::new();
    let mut continuing = false;
    for line in output.lines() {
        let line = line.trim_end_matches('\r');
        if let Some(c) = diagnostic_re().captures(line) {
            diagnostics.push(Diagnostic {
                file: Some(c[1].replace('\\', "/")),
                line: c[2].parse().unwrap_or(0),
                column: c[3].parse().unwrap_or(0),
                code: c[4].to_string(),
                message: c[5].to_string(),
            });
            continuing = true;
        } else if let Some(c) = global_re().captures(line) {
            diagnostics.push(Diagnostic {
                file: None,
                line: 0,
                column: 0,
                code: c[1].to_string(),
                message: c[2].to_string(),
            });
            continuing = true;
        } else if continuing && line.starts_with(char::is_whitespace) && !line.trim().is_empty() {
            let last = diagnostics
                .last_mut()
                .expect("continuing implies a diagnostic");
            last.message.push('\n');
            last.message.push_str(line.trim());
        } else {
            continuing = false;
            if !line.trim().is_empty() {
                raw.push(line.to_string());
            }
        }
    }
    (diagnostics, raw)
}

/// TypeScript inputs of a package, relative and sorted. Declaration files and
/// `node_modules` are excluded.
pub fn typescript_inputs(pkg_dir: &Path) -> Vec<String> {
    let mut files: Vec<String> = WalkDir::new(pkg_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != "node_modules")
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            let rel = e
                .path()
                .strip_prefix(pkg_dir)
                .ok()?
                .to_string_lossy()
                .replace('\\', "/");
            let is_ts = rel.ends_with(".ts") || rel.ends_with(".mts") || rel.ends_with(".cts");
            let is_decl =
                rel.ends_with(".d.ts") || rel.ends_with(".d.mts") || rel.ends_with(".d.cts");
            (is_ts && !is_decl).then_some(rel)
        })
        .collect();
    files.sort();
    files
}

struct Finished {
    code: Option<i32>,
    output: String,
}

fn run(
    compiler: &Path,
    args: &[String],
    cwd: &Path,
    timeout: Duration,
) -> Result<Finished, CheckError> {
    let mut child = Command::new(compiler)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                CheckError::CompilerNotFound(compiler.to_path_buf())
            }
            _ => CheckError::Io {
                path: compiler.to_path_buf(),
                source: e,
            },
        })?;
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if started.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(CheckError::Timeout(timeout));
            }
            Ok(None) => thread::sleep(Duration::from_millis(20)),
            Err(e) => {
                return Err(CheckError::Io {
                    path: compiler.to_path_buf(),
                    source: e,
                })
            }
        }
    };
    let mut output = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if !err.is_empty() {
        if !output.is_empty() && !output.ends_with('\n') {
            output.push('\n');
        }
        output.push_str(&err);
    }
    Ok(Finished {
        code: status.code(),
        output,
    })
}

/// The compiler's self-reported version, e.g. `4.9.3`.
pub fn compiler_version(compiler: &Path) -> Result<String, CheckError> {
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    let done = run(
        compiler,
        &["--version".to_string()],
        &cwd,
        Duration::from_secs(60),
    )?;
    let text = done.output.trim();
    Ok(text.strip_prefix("Version ").unwrap_or(text).to_string())
}

/// Makes each declaration package in `types_dir` visible as
/// `node_modules/@types/<name>` inside `pkg_dir`, unless one is already there.
pub fn install_ambient_types(pkg_dir: &Path, types_dir: &Path) -> Result<(), CheckError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CheckError::Io { path, source }
    };
    let dest_root = pkg_dir.join("node_modules").join("@types");
    let entries = fs::read_dir(types_dir).map_err(io(types_dir))?;
    for entry in entries {
        let entry = entry.map_err(io(types_dir))?;
        let dest = dest_root.join(entry.file_name());
        if dest.exists() {
            continue;
        }
        fs::create_dir_all(&dest_root).map_err(io(&dest_root))?;
        let source = fs::canonicalize(entry.path()).map_err(io(&entry.path()))?;
        link_or_copy(&source, &dest)?;
    }
    Ok(())
}

#[cfg(unix)]
fn link_or_copy(source: &Path, dest: &Path) -> Result<(), CheckError> {
    std::os::unix::fs::symlink(source, dest).map_err(|e| CheckError::Io {
        path: dest.to_path_buf(),
        source: e,
    })
}

#[cfg(not(unix))]
fn link_or_copy(source: &Path, dest: &Path) -> Result<(), CheckError> {
    for entry in WalkDir::new(source).into_iter().filter_map(Result::ok) {
        let rel = entry
            .path()
            .strip_prefix(source)
            .expect("walk stays below its root");
        let target = dest.join(rel);
        let io = |e| CheckError::Io {
            path: target.clone(),
            source: e,
        };
        if entry.file_type().is_dir() {
            fs::create_dir_all(&target).map_err(io)?;
        } else {
            fs::copy(entry.path(), &target).map_err(io)?;
        }
    }
    Ok(())
}

fn check_with_flags(
    pkg_dir: &Path,
    config: &CompileConfig,
    args: Vec<String>,
    declarations_dir: Option<PathBuf>,
) -> Result<CheckResult, CheckError> {
    let files = typescript_inputs(pkg_dir);
    if files.is_empty() {
        return Err(CheckError::NotAPackage(pkg_dir.to_path_buf()));
    }
    if let Some(types) = &config.ambient_types {
        install_ambient_types(pkg_dir, types)?;
    }
    let mut argv = args;
    argv.push("--pretty".into());
    argv.push("false".into());
    argv.extend(files.iter().cloned());
    let done = run(
        &config.compiler_path,
        &argv,
        pkg_dir,
        Duration::from_secs(config.timeout_secs),
    )?;
    let (diagnostics, raw_log) = parse_diagnostics(&done.output);
    if diagnostics.is_empty() && !matches!(done.code, Some(0)) {
        return Err(CheckError::CompilerFailed {
            code: done.code,
            output: done.output,
        });
    }
    let error_free_files = CheckResult::error_free(&files, &diagnostics);
    let package = pkg_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(CheckResult {
        package,
        type_checks: diagnostics.is_empty(),
        files_checked: files.len(),
        error_free_files,
        diagnostics,
        declarations_dir,
        compiler_version: compiler_version(&config.compiler_path).ok(),
        raw_log,
    })
}

/// Type checks every TypeScript file of `pkg_dir` in one compiler run.
pub fn type_check(pkg_dir: &Path, config: &CompileConfig) -> Result<CheckResult, CheckError> {
    check_with_flags(pkg_dir, config, config.arguments(), None)
}

/// Type checks while emitting declarations into `out_dir`. Declarations are
/// produced even when the package has type errors.
pub fn emit_declarations(
    pkg_dir: &Path,
    config: &CompileConfig,
    out_dir: &Path,
) -> Result<CheckResult, CheckError> {
    fs::create_dir_all(out_dir).map_err(|source| CheckError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let out_dir = fs::canonicalize(out_dir).map_err(|source| CheckError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut args = Vec::new();
    for a in config.arguments() {
        if a == "--noEmit" {
            args.extend([
                "--declaration".into(),
                "--emitDeclarationOnly".into(),
                "--outDir".into(),
            ]);
            args.push(out_dir.to_string_lossy().into_owned());
        } else {
            args.push(a);
        }
    }
    check_with_flags(pkg_dir, config, args, Some(out_dir))
}
