//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use typeloom::checker::{CompileConfig, COMPILER_ENV};
use typeloom::fim::{FimRequest, FimResponse};
use typeloom::predictions::{LocationPredictionTable, RankedCandidates};
use typeloom::source::SourceUnit;
use typeloom::weave::{collect_sites, SiteKind};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// The pinned compiler: `$TYPELOOM_TSC`, else the copy installed under
/// `tools/` by `npm ci --prefix tools`. Only 4.x versions are accepted,
/// since newer releases reject the fixed flag set.
pub fn compiler() -> Option<PathBuf> {
    let candidates = std::env::var_os(COMPILER_ENV)
        .map(PathBuf::from)
        .into_iter()
        .chain(std::iter::once(
            workspace_root().join("tools/node_modules/.bin/tsc"),
        ));
    for c in candidates {
        let Ok(out) = Command::new(&c).arg("--version").output() else {
            continue;
        };
        if String::from_utf8_lossy(&out.stdout)
            .trim()
            .starts_with("Version 4.")
        {
            return Some(c);
        }
    }
    None
}

/// Declaration packages (Node.js types) made visible to checked packages.
pub fn ambient_types() -> Option<PathBuf> {
    let dir = workspace_root().join("tools/node_modules/@types");
    dir.is_dir().then_some(dir)
}

pub fn compile_config() -> Option<CompileConfig> {
    Some(CompileConfig {
        compiler_path: compiler()?,
        ambient_types: ambient_types(),
        ..CompileConfig::default()
    })
}

/// A location table for `unit` that assigns types to sites by name. Keys are
/// identifiers; `name()` selects the result of the named function.
pub fn predictions_by_name(unit: &SourceUnit, types: &[(&str, &str)]) -> LocationPredictionTable {
    let mut table = LocationPredictionTable::default();
    for site in collect_sites(unit).unwrap() {
        let Some(id) = &site.identifier else { continue };
        let key = match site.kind {
            SiteKind::FunctionResult => format!("{id}()"),
            _ => id.clone(),
        };
        if let Some((_, ty)) = types.iter().find(|(k, _)| *k == key) {
            table.insert(
                &unit.relative_path,
                site.span,
                RankedCandidates::single(*ty, 1.0),
            );
        }
    }
    table
}

pub fn copy_dir(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.unwrap();
        let target = to.join(entry.path().strip_prefix(from).unwrap());
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// The parameter name a fill-in-the-middle prompt asks about.
pub fn prompted_parameter(prompt: &str) -> &str {
    let before = prompt.split("<|mask:0|>").next().unwrap_or("");
    let before = before.trim_end().trim_end_matches(':').trim_end();
    let start = before
        .rfind(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$'))
        .map_or(0, |i| i + 1);
    &before[start..]
}

/// The scripted completion model used by the pipeline tests: the answer
/// depends only on the parameter name, and often carries trailing tokens
/// that must be cut off.
pub fn scripted_completion(request: &FimRequest) -> String {
    let name = prompted_parameter(&request.prompt).to_ascii_lowercase();
    let ty = if [
        "str",
        "text",
        "sep",
        "ch",
        "name",
        "message",
        "separator",
        "decamelized",
    ]
    .contains(&name.as_str())
    {
        "string, y: number"
    } else if name.contains("arr") || name == "list" {
        "any[]) {"
    } else if name.starts_with("is") {
        "boolean"
    } else if name.starts_with("thing") {
        "Function"
    } else if name == "buffer" {
        "Buffer"
    } else {
        "number, y: number"
    };
    format!("{ty}<|endofmask|>")
}

/// A minimal HTTP server answering completion requests on a local port.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    port: u16,
}

impl StubServer {
    pub fn start(respond: fn(&FimRequest) -> String) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let (stop2, requests2) = (stop.clone(), requests.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                if stop2.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let requests = requests2.clone();
                thread::spawn(move || serve(stream, respond, &requests));
            }
        });
        StubServer {
            url: format!("http://127.0.0.1:{port}/generate"),
            requests,
            stop,
            port,
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(("127.0.0.1", self.port));
    }
}

fn serve(stream: TcpStream, respond: fn(&FimRequest) -> String, requests: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header).unwrap_or(0) == 0 {
                return;
            }
            let header = header.trim_end();
            if header.is_empty() {
                break;
            }
            if let Some((k, v)) = header.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        requests.fetch_add(1, Ordering::SeqCst);
        let (status, payload) = match serde_json::from_slice::<FimRequest>(&body) {
            Ok(req) => (
                "200 OK",
                serde_json::to_string(&FimResponse {
                    text: respond(&req),
                })
                .unwrap(),
            ),
            Err(e) => (
                "400 Bad Request",
                serde_json::json!({ "error": e.to_string() }).to_string(),
            ),
        };
        let mut out = &stream;
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if out.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

/// A local address with nothing listening on it.
pub fn unreachable_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    format!("http://127.0.0.1:{port}/generate")
}
