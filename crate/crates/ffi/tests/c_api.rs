use std::ffi::{c_char, CStr, CString};
use std::ptr;

use typeloom_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> Option<String> {
    if s.is_null() {
        return None;
    }
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    tl_string_free(s);
    Some(out)
}

unsafe fn source(path: &str, text: &str) -> (*mut TlSource, bool) {
    let mut handle = ptr::null_mut();
    let mut parses = false;
    assert_eq!(
        tl_source_new(c(path).as_ptr(), c(text).as_ptr(), &mut handle, &mut parses),
        TlStatus::Ok
    );
    (handle, parses)
}

#[test]
fn location_weaving_through_handles() {
    unsafe {
        let (src, parses) = source("a.js", "function f(x) { return x + 1; }\n");
        assert!(parses);
        let mut count = 0;
        assert_eq!(tl_source_site_count(src, &mut count), TlStatus::Ok);
        assert_eq!(count, 2);

        let csv = "file,line1,col1,line2,col2,t1,p1\na.js,1,11,1,12,Number,0.9\n";
        let mut table = ptr::null_mut();
        assert_eq!(
            tl_predictions_parse(
                c(csv).as_ptr(),
                TlPredictionFormat::LocationKeyed,
                &mut table
            ),
            TlStatus::Ok
        );
        let mut text = ptr::null_mut();
        let mut annotated = 0;
        assert_eq!(
            tl_weave(src, table, &mut text, &mut annotated),
            TlStatus::Ok
        );
        assert_eq!(annotated, 1);
        assert_eq!(
            take(text).unwrap(),
            "function f(x: number) { return x + 1; }\n"
        );
        tl_predictions_free(table);
        tl_source_free(src);
    }
}

#[test]
fn conversion_status_and_text() {
    unsafe {
        let (src, _) = source("a.js", "var x = 2;\nmodule.exports.foo = 42;\n");
        let mut status = TlConversion::Failed;
        let mut text = ptr::null_mut();
        assert_eq!(tl_convert_file(src, &mut status, &mut text), TlStatus::Ok);
        assert_eq!(status, TlConversion::Converted);
        assert_eq!(take(text).unwrap(), "var x = 2;\nexport var foo = 42;\n");
        tl_source_free(src);

        let (src, _) = source("b.mjs", "export const y = 1;\n");
        assert_eq!(tl_convert_file(src, &mut status, &mut text), TlStatus::Ok);
        assert_eq!(status, TlConversion::AlreadyEsm);
        assert!(text.is_null());
        tl_source_free(src);
    }
}

#[test]
fn string_helpers() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            tl_normalize_type(
                c("complex").as_ptr(),
                TlPredictionFormat::TokenAligned,
                &mut out
            ),
            TlStatus::Ok
        );
        assert_eq!(take(out).unwrap(), "any");
        assert_eq!(
            tl_extract_type_prefix(c("number, y: number<|endofmask|>").as_ptr(), &mut out),
            TlStatus::Ok
        );
        assert_eq!(take(out).unwrap(), "number");
        assert_eq!(
            tl_extract_type_prefix(c(") {").as_ptr(), &mut out),
            TlStatus::Ok
        );
        assert!(out.is_null());
        assert!(!CStr::from_ptr(tl_version()).to_str().unwrap().is_empty());
    }
}

#[test]
fn errors_set_codes_and_messages() {
    unsafe {
        let mut handle = ptr::null_mut();
        assert_eq!(
            tl_source_new(ptr::null(), c("x").as_ptr(), &mut handle, ptr::null_mut()),
            TlStatus::NullArgument
        );
        let msg = CStr::from_ptr(tl_last_error_message()).to_str().unwrap();
        assert!(msg.contains("path"));

        let bad = [0xffu8, 0];
        assert_eq!(
            tl_source_new(
                bad.as_ptr().cast(),
                c("x").as_ptr(),
                &mut handle,
                ptr::null_mut()
            ),
            TlStatus::InvalidUtf8
        );

        let mut table = ptr::null_mut();
        assert_eq!(
            tl_predictions_parse(
                c("not,a,table\n").as_ptr(),
                TlPredictionFormat::LocationKeyed,
                &mut table
            ),
            TlStatus::PredictionError
        );
        assert!(table.is_null());

        let (src, parses) = source("broken.js", "function (");
        assert!(!parses);
        let mut n = 0;
        assert_eq!(tl_source_site_count(src, &mut n), TlStatus::ParseError);
        tl_source_free(src);

        let mut json = ptr::null_mut();
        let dir = tempfile::tempdir().unwrap();
        let status = tl_type_check(
            c(dir.path().to_str().unwrap()).as_ptr(),
            c("/nonexistent/tsc").as_ptr(),
            &mut json,
        );
        assert_eq!(status, TlStatus::InvalidArgument);

        let (src, _) = source("a.js", "let a = 1;");
        assert_eq!(tl_source_site_count(src, &mut n), TlStatus::Ok);
        assert!(tl_last_error_message().is_null());
        tl_source_free(src);
    }
}

#[test]
fn null_handles_are_ignored_by_free() {
    unsafe {
        tl_source_free(ptr::null_mut());
        tl_predictions_free(ptr::null_mut());
        tl_string_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/typeloom.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "tl_source_new",
        "tl_weave",
        "tl_last_error_message",
        "TL_STATUS_OK",
        "typedef struct TlSource TlSource",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let probe = dir.path().join("probe.c");
    std::fs::write(
        &probe,
        "#include \"typeloom.h\"\nint main(void) { TlSource *s = 0; size_t n = 0; return tl_source_site_count(s, &n) == TL_STATUS_OK; }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&probe)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler available; header syntax not compiled"),
    }
}
