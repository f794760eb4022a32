//! C interface to the typeloom migration library.
//!
//! Every function returns a [`TlStatus`]. Objects are opaque handles that
//! the caller releases with the matching `*_free` function; strings returned
//! through out-parameters are released with [`tl_string_free`]. After a
//! failure, [`tl_last_error_message`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use typeloom::checker::{type_check, CompileConfig};
use typeloom::convert::{convert_file, ConversionStatus};
use typeloom::fim::extract_valid_type_prefix;
use typeloom::predictions::{
    normalize_type, LocationPredictionTable, SourceFormat, TokenPredictionTable,
};
use typeloom::source::SourceUnit;
use typeloom::weave::{collect_sites, weave_location_keyed, weave_token_aligned};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    PredictionError = 4,
    IoError = 5,
    CompilerError = 6,
    InvalidArgument = 7,
    Panic = 8,
}

/// Outcome of converting one file to module syntax.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlConversion {
    Converted = 0,
    AlreadyEsm = 1,
    SkippedDynamic = 2,
    Failed = 3,
}

/// Origin of a type name passed to [`tl_normalize_type`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlPredictionFormat {
    TokenAligned = 0,
    LocationKeyed = 1,
}

/// A parsed JavaScript or TypeScript file.
pub struct TlSource(SourceUnit);

/// A table of type predictions for one file.
pub struct TlPredictions(Predictions);

enum Predictions {
    Token(TokenPredictionTable),
    Location(LocationPredictionTable),
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(TlStatus, String);

impl Failure {
    fn new(status: TlStatus, message: impl std::fmt::Display) -> Self {
        Failure(status, message.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TlStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error");
            TlStatus::Panic
        }
    }
}

unsafe fn text_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            TlStatus::NullArgument,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(TlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(TlStatus::NullArgument, format!("{what} is null")))
}

fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }
        .ok_or_else(|| Failure::new(TlStatus::NullArgument, format!("{what} is null")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior nul bytes removed")
        .into_raw()
}

/// Version of the library as a static string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been released before.
#[no_mangle]
pub unsafe extern "C" fn tl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `text` as the file `path`; the extension selects the dialect.
/// Text that does not parse still yields a handle, with `*parses` false.
///
/// # Safety
/// String arguments must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_source_new(
    path: *const c_char,
    text: *const c_char,
    out: *mut *mut TlSource,
    parses: *mut bool,
) -> TlStatus {
    guard(|| {
        let path = text_arg(path, "path")?;
        let text = text_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let unit = SourceUnit::new(path, text);
        if let Some(p) = parses.as_mut() {
            *p = unit.parses();
        }
        *out = Box::into_raw(Box::new(TlSource(unit)));
        Ok(())
    })
}

/// # Safety
/// `source` must be null or a handle from [`tl_source_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_source_free(source: *mut TlSource) {
    if !source.is_null() {
        drop(Box::from_raw(source));
    }
}

/// Number of annotation sites (variables, parameters, results) lacking a
/// type.
///
/// # Safety
/// `source` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_source_site_count(
    source: *const TlSource,
    count: *mut usize,
) -> TlStatus {
    guard(|| {
        let source = handle_arg(source, "source")?;
        let count = out_arg(count, "count")?;
        let sites = collect_sites(&source.0).map_err(|e| Failure::new(TlStatus::ParseError, e))?;
        *count = sites.len();
        Ok(())
    })
}

/// Converts one file to module syntax on its own, without rewriting the
/// specifiers of other files. `*text` receives the converted text, or null
/// when the file is left as it is.
///
/// # Safety
/// `source` must be a live handle; out-parameters must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_convert_file(
    source: *const TlSource,
    status: *mut TlConversion,
    text: *mut *mut c_char,
) -> TlStatus {
    guard(|| {
        let source = handle_arg(source, "source")?;
        let status = out_arg(status, "status")?;
        let text = out_arg(text, "text")?;
        let outcome = convert_file(&source.0);
        *status = match outcome.status {
            ConversionStatus::Converted => TlConversion::Converted,
            ConversionStatus::AlreadyEsm => TlConversion::AlreadyEsm,
            ConversionStatus::SkippedDynamic => TlConversion::SkippedDynamic,
            ConversionStatus::Failed => TlConversion::Failed,
        };
        *text = outcome
            .rewritten_text
            .map_or(ptr::null_mut(), into_c_string);
        Ok(())
    })
}

/// Parses a prediction table from CSV text.
///
/// # Safety
/// `csv` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_predictions_parse(
    csv: *const c_char,
    format: TlPredictionFormat,
    out: *mut *mut TlPredictions,
) -> TlStatus {
    guard(|| {
        let csv = text_arg(csv, "csv")?;
        let out = out_arg(out, "out")?;
        let origin = Path::new("<memory>");
        let table = match format {
            TlPredictionFormat::TokenAligned => {
                TokenPredictionTable::parse(csv, origin).map(Predictions::Token)
            }
            TlPredictionFormat::LocationKeyed => {
                LocationPredictionTable::parse(csv, origin).map(Predictions::Location)
            }
        }
        .map_err(|e| Failure::new(TlStatus::PredictionError, e))?;
        *out = Box::into_raw(Box::new(TlPredictions(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from [`tl_predictions_parse`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn tl_predictions_free(table: *mut TlPredictions) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Weaves predictions into a file. `*text` receives the TypeScript text and
/// `*annotated` the number of annotations inserted; a result that would not
/// parse is reverted to the original text with zero annotations.
///
/// # Safety
/// Handles must be live; out-parameters must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_weave(
    source: *const TlSource,
    table: *const TlPredictions,
    text: *mut *mut c_char,
    annotated: *mut usize,
) -> TlStatus {
    guard(|| {
        let source = handle_arg(source, "source")?;
        let table = handle_arg(table, "table")?;
        let text = out_arg(text, "text")?;
        let woven = match &table.0 {
            Predictions::Token(t) => weave_token_aligned(&source.0, t),
            Predictions::Location(t) => weave_location_keyed(&source.0, t),
        }
        .map_err(|e| Failure::new(TlStatus::ParseError, e))?;
        if let Some(n) = annotated.as_mut() {
            *n = if woven.reverted {
                0
            } else {
                woven.plan.assignments.len()
            };
        }
        *text = into_c_string(woven.unit.text);
        Ok(())
    })
}

/// Canonical spelling of a predicted type name.
///
/// # Safety
/// `raw` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_normalize_type(
    raw: *const c_char,
    format: TlPredictionFormat,
    out: *mut *mut c_char,
) -> TlStatus {
    guard(|| {
        let raw = text_arg(raw, "raw")?;
        let out = out_arg(out, "out")?;
        let format = match format {
            TlPredictionFormat::TokenAligned => SourceFormat::TokenAligned,
            TlPredictionFormat::LocationKeyed => SourceFormat::LocationKeyed,
        };
        *out = into_c_string(normalize_type(raw, format));
        Ok(())
    })
}

/// The longest prefix of generated text that is a type, or null.
///
/// # Safety
/// `generated` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_extract_type_prefix(
    generated: *const c_char,
    out: *mut *mut c_char,
) -> TlStatus {
    guard(|| {
        let generated = text_arg(generated, "generated")?;
        let out = out_arg(out, "out")?;
        *out = extract_valid_type_prefix(generated)
            .map_or(ptr::null_mut(), |p| into_c_string(p.trim().to_string()));
        Ok(())
    })
}

/// Type checks the TypeScript files of a package directory and returns the
/// result as JSON. A null `compiler` uses the default compiler lookup.
///
/// # Safety
/// String arguments must be nul-terminated or (for `compiler`) null; `json`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn tl_type_check(
    pkg_dir: *const c_char,
    compiler: *const c_char,
    json: *mut *mut c_char,
) -> TlStatus {
    guard(|| {
        let dir = text_arg(pkg_dir, "pkg_dir")?;
        let json = out_arg(json, "json")?;
        let mut config = CompileConfig::default();
        if !compiler.is_null() {
            config.compiler_path = PathBuf::from(text_arg(compiler, "compiler")?);
        }
        let result = type_check(Path::new(dir), &config).map_err(|e| {
            let status = match e {
                typeloom::checker::CheckError::Io { .. } => TlStatus::IoError,
                typeloom::checker::CheckError::NotAPackage(_) => TlStatus::InvalidArgument,
                _ => TlStatus::CompilerError,
            };
            Failure::new(status, e)
        })?;
        *json = into_c_string(serde_json::to_string(&result).expect("check results serialize"));
        Ok(())
    })
}
