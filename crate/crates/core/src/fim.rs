//! Fill-in-the-middle parameter annotation against a completion endpoint.
//!
//! Each unannotated parameter is visited in source order. The text up to the
//! parameter name, followed by `": "` and the insertion sentinel, the rest of
//! the file and the trailing sentinel, forms the prompt. The longest prefix of
//! the generated text that parses as a type is inserted; after a configured
//! number of attempts without one the parameter is left alone.

use std::ops::Range;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::predictions::{LocationPredictionTable, RankedCandidates};
use crate::source::lexer::{self, TokenKind};
use crate::source::{SourceUnit, Span};
use crate::typesyntax;
use crate::weave::{collect_sites, AnnotationSite, SiteKind};

#[derive(Debug, thiserror::Error)]
pub enum FimError {
    #[error("completion endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("site is not a function parameter")]
    NotAParameter,
    #[error("{0}")]
    Parse(#[from] crate::source::ParseError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct FimConfig {
    pub endpoint: String,
    pub insertion_sentinel: String,
    pub file_end_sentinel: String,
    pub end_of_mask: String,
    /// Characters of source context around the site.
    pub context_window: usize,
    pub max_new_tokens: usize,
    pub attempts: usize,
    pub timeout_secs: u64,
    /// Extra sampling parameters passed through to the endpoint.
    pub sampling: serde_json::Map<String, serde_json::Value>,
}

impl Default for FimConfig {
    fn default() -> Self {
        FimConfig {
            endpoint: "http://127.0.0.1:8080/generate".into(),
            insertion_sentinel: "<|mask:0|>".into(),
            file_end_sentinel: "<|mask:1|>".into(),
            end_of_mask: "<|endofmask|>".into(),
            context_window: 2000,
            max_new_tokens: 64,
            attempts: 3,
            timeout_secs: 60,
            sampling: serde_json::Map::new(),
        }
    }
}

impl FimConfig {
    /// The sentinel pair closing every prompt.
    pub fn trailing_sentinel(&self) -> String {
        format!("{}{}", self.file_end_sentinel, self.insertion_sentinel)
    }
}

/// A request to the completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    pub stop: Vec<String>,
    #[serde(flatten)]
    pub sampling: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimResponse {
    pub text: String,
}

pub trait CompletionClient: Sync {
    fn complete(&self, request: &FimRequest) -> Result<FimResponse, FimError>;
}

/// JSON-over-HTTP client: `POST {prompt, max_new_tokens, stop}` answered by
/// `{text}`.
pub struct HttpCompletionClient {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpCompletionClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        HttpCompletionClient {
            endpoint: endpoint.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn from_config(config: &FimConfig) -> Self {
        Self::new(
            config.endpoint.clone(),
            Duration::from_secs(config.timeout_secs),
        )
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, request: &FimRequest) -> Result<FimResponse, FimError> {
        let response = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => FimError::BadResponse(format!("status {code}")),
                other => FimError::EndpointUnavailable(other.to_string()),
            })?;
        response
            .into_json()
            .map_err(|e| FimError::BadResponse(e.to_string()))
    }
}

/// Builds the prompt for a parameter site of `unit`.
pub fn build_fim_prompt(
    unit: &SourceUnit,
    site: &AnnotationSite,
    config: &FimConfig,
) -> Result<FimRequest, FimError> {
    if site.kind != SiteKind::FunctionParameter {
        return Err(FimError::NotAParameter);
    }
    Ok(prompt_at(
        &unit.text,
        site.insert_at,
        site.parameter_list.clone(),
        config,
    ))
}

fn prompt_at(
    text: &str,
    insert_at: usize,
    parameter_list: Option<Range<usize>>,
    config: &FimConfig,
) -> FimRequest {
    let context = context_range(text, insert_at, parameter_list, config.context_window);
    let mut prompt = String::with_capacity(context.len() + 64);
    prompt.push_str(&text[context.start..insert_at]);
    prompt.push_str(": ");
    prompt.push_str(&config.insertion_sentinel);
    prompt.push_str(&text[insert_at..context.end]);
    prompt.push_str(&config.trailing_sentinel());
    FimRequest {
        prompt,
        max_new_tokens: config.max_new_tokens,
        stop: vec![config.end_of_mask.clone()],
        sampling: config.sampling.clone(),
    }
}

/// A window of about `window` characters centred on `at`, widened to cover
/// the whole parameter list.
fn context_range(
    text: &str,
    at: usize,
    parameter_list: Option<Range<usize>>,
    window: usize,
) -> Range<usize> {
    let before: Vec<usize> = text[..at].char_indices().map(|(i, _)| i).collect();
    let after_chars = text[at..].chars().count();
    let mut left = window / 2;
    let mut right = window - left;
    // Budget unused on one side moves to the other.
    if before.len() < left {
        right += left - before.len();
        left = before.len();
    }
    if after_chars < right {
        left = (left + right - after_chars).min(before.len());
        right = after_chars;
    }
    let mut start = if left == 0 {
        at
    } else {
        before[before.len() - left]
    };
    let mut end = text[at..]
        .char_indices()
        .nth(right)
        .map(|(i, _)| at + i)
        .unwrap_or(text.len());
    if let Some(params) = parameter_list {
        start = start.min(params.start);
        end = end.max(params.end);
    }
    start..end
}

/// The longest prefix of `generated`, cut at a token boundary, that parses
/// as a type. Text after the end-of-mask marker should already be removed.
///
/// Multi-character punctuators are also cut between their characters, so
/// that `Promise<void>>` yields `Promise<void>`.
pub fn extract_valid_type_prefix(generated: &str) -> Option<&str> {
    let mut cuts = Vec::new();
    for t in lexer::tokenize(generated) {
        if t.kind == TokenKind::Punctuator {
            cuts.extend(
                generated[t.range.clone()]
                    .char_indices()
                    .skip(1)
                    .map(|(i, _)| t.range.start + i),
            );
        }
        cuts.push(t.range.end);
    }
    cuts.into_iter()
        .rev()
        .map(|end| &generated[..end])
        .find(|prefix| typesyntax::is_type(prefix))
}

/// Text of a completion up to the end-of-mask marker.
pub fn generated_text<'r>(response: &'r FimResponse, config: &FimConfig) -> &'r str {
    match response.text.find(&config.end_of_mask) {
        Some(k) => &response.text[..k],
        None => &response.text,
    }
}

/// One parameter annotated by the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FimAnnotation {
    pub identifier: String,
    /// Span of the parameter name in the original file.
    pub span: Span,
    pub type_text: String,
}

#[derive(Debug)]
pub struct FimOutcome {
    /// The annotated text (the original text if the file was aborted).
    pub unit: SourceUnit,
    pub annotations: Vec<FimAnnotation>,
    pub parameters: usize,
    pub requests: usize,
    /// Set when the endpoint failed and the file was abandoned.
    pub error: Option<String>,
}

impl FimOutcome {
    /// The annotations as a location-keyed table over the original file.
    pub fn location_table(&self, file: &str) -> LocationPredictionTable {
        let mut table = LocationPredictionTable::default();
        for a in &self.annotations {
            table.insert(
                file,
                a.span,
                RankedCandidates::single(a.type_text.clone(), 1.0),
            );
        }
        table
    }
}

/// Annotates every unannotated parameter of `unit`, one request at a time.
///
/// Each prompt is built from the text with all earlier insertions applied.
/// If the endpoint fails the whole file is left unannotated.
pub fn annotate_parameters_via_fim(
    unit: &SourceUnit,
    client: &dyn CompletionClient,
    config: &FimConfig,
) -> Result<FimOutcome, FimError> {
    let sites: Vec<AnnotationSite> = collect_sites(unit)?
        .into_iter()
        .filter(|s| s.kind == SiteKind::FunctionParameter)
        .collect();
    let mut text = unit.text.clone();
    // (original offset, inserted length), in insertion order; offsets increase.
    let mut inserted: Vec<(usize, usize)> = Vec::new();
    let shift = |inserted: &[(usize, usize)], at: usize| -> usize {
        at + inserted
            .iter()
            .filter(|(o, _)| *o <= at)
            .map(|(_, n)| n)
            .sum::<usize>()
    };
    let mut annotations = Vec::new();
    let mut requests = 0;

    for site in &sites {
        let at = shift(&inserted, site.insert_at);
        let params = site
            .parameter_list
            .clone()
            .map(|r| shift(&inserted, r.start)..shift(&inserted, r.end));
        let request = prompt_at(&text, at, params, config);
        for _ in 0..config.attempts.max(1) {
            requests += 1;
            let response = match client.complete(&request) {
                Ok(r) => r,
                Err(e @ FimError::EndpointUnavailable(_)) => {
                    return Ok(FimOutcome {
                        unit: unit.clone(),
                        annotations: Vec::new(),
                        parameters: sites.len(),
                        requests,
                        error: Some(e.to_string()),
                    });
                }
                Err(_) => continue,
            };
            if let Some(prefix) = extract_valid_type_prefix(generated_text(&response, config)) {
                let type_text = prefix.trim().to_string();
                let insertion = format!(": {type_text}");
                text.insert_str(at, &insertion);
                inserted.push((site.insert_at, insertion.len()));
                annotations.push(FimAnnotation {
                    identifier: site.identifier.clone().unwrap_or_default(),
                    span: site.span,
                    type_text,
                });
                break;
            }
        }
    }

    let out = SourceUnit::new(crate::weave::typescript_path(&unit.relative_path), text);
    Ok(FimOutcome {
        unit: out,
        annotations,
        parameters: sites.len(),
        requests,
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;

    struct Scripted {
        replies: Mutex<Vec<Result<String, ()>>>,
        seen: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<&str, ()>>) -> Self {
            Scripted {
                replies: Mutex::new(
                    replies
                        .into_iter()
                        .rev()
                        .map(|r| r.map(str::to_string))
                        .collect(),
                ),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl CompletionClient for Scripted {
        fn complete(&self, request: &FimRequest) -> Result<FimResponse, FimError> {
            self.seen.lock().unwrap().push(request.prompt.clone());
            match self.replies.lock().unwrap().pop() {
                Some(Ok(text)) => Ok(FimResponse { text }),
                _ => Err(FimError::EndpointUnavailable("down".into())),
            }
        }
    }

    #[test]
    fn prompt_layout() {
        let unit = SourceUnit::new("a.js", "function f(x) {\n  return x + 1;\n}");
        let site = collect_sites(&unit)
            .unwrap()
            .into_iter()
            .find(|s| s.kind == SiteKind::FunctionParameter)
            .unwrap();
        let req = build_fim_prompt(&unit, &site, &FimConfig::default()).unwrap();
        assert_eq!(
            req.prompt,
            "function f(x: <|mask:0|>) {\n  return x + 1;\n}<|mask:1|><|mask:0|>"
        );
        assert_eq!(req.stop, ["<|endofmask|>"]);
    }

    #[test]
    fn prompt_window_is_bounded_and_covers_parameters() {
        let body = "x;\n".repeat(2000);
        let src = format!("{body}function f(aaa, bbb) {{}}\n{body}");
        let unit = SourceUnit::new("a.js", src.clone());
        let site = collect_sites(&unit)
            .unwrap()
            .into_iter()
            .find(|s| s.identifier.as_deref() == Some("bbb"))
            .unwrap();
        let config = FimConfig {
            context_window: 10,
            ..FimConfig::default()
        };
        let req = build_fim_prompt(&unit, &site, &config).unwrap();
        assert!(
            req.prompt.contains("(aaa, bbb: <|mask:0|>)"),
            "{}",
            req.prompt
        );
        assert!(req.prompt.len() < 60);
    }

    #[test]
    fn valid_prefixes() {
        assert_eq!(extract_valid_type_prefix("number) {"), Some("number"));
        assert_eq!(
            extract_valid_type_prefix("Array<string>, y"),
            Some("Array<string>")
        );
        assert_eq!(
            extract_valid_type_prefix("(a: number) => void;"),
            Some("(a: number) => void")
        );
        assert_eq!(extract_valid_type_prefix(") {"), None);
        assert_eq!(
            extract_valid_type_prefix("Promise<void>>"),
            Some("Promise<void>")
        );
        assert_eq!(
            extract_valid_type_prefix("Map<string, number>= 1"),
            Some("Map<string, number>")
        );
    }

    #[test]
    fn parameters_are_annotated_in_order_with_retries() {
        let unit = SourceUnit::new("a.js", "function f(a, b) { return a + b; }");
        let client = Scripted::new(vec![Ok("number<|endofmask|>"), Ok(")))"), Ok("string, c")]);
        let out = annotate_parameters_via_fim(&unit, &client, &FimConfig::default()).unwrap();
        assert_eq!(
            out.unit.text,
            "function f(a: number, b: string) { return a + b; }"
        );
        assert_eq!(out.requests, 3);
        let seen = client.seen.lock().unwrap();
        assert!(seen[1].starts_with("function f(a: number, b: <|mask:0|>)"));
        let table = out.location_table("a.js");
        assert_eq!(
            table.get(&Span::new(1, 11, 1, 12)).unwrap().top().type_text,
            "number"
        );
    }

    #[test]
    fn exhausted_attempts_leave_parameter_alone() {
        let unit = SourceUnit::new("a.js", "function f(a) {}");
        let client = Scripted::new(vec![Ok("))"), Ok("))"), Ok("))")]);
        let out = annotate_parameters_via_fim(&unit, &client, &FimConfig::default()).unwrap();
        assert_eq!(out.unit.text, "function f(a) {}");
        assert_eq!(out.requests, 3);
    }

    #[test]
    fn unavailable_endpoint_aborts_file() {
        let unit = SourceUnit::new("a.js", "function f(a, b) {}");
        let client = Scripted::new(vec![Ok("number"), Err(())]);
        let out = annotate_parameters_via_fim(&unit, &client, &FimConfig::default()).unwrap();
        assert_eq!(out.unit.text, "function f(a, b) {}");
        assert!(out.annotations.is_empty());
        assert!(out.error.is_some());
    }
}
