//! Completion API client: prompt in, text out, bearer-token auth.

use std::collections::{HashMap, VecDeque};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::template::{prompt_tokens, target_sentence};
use super::PromptError;

pub const DEFAULT_KEY_ENV: &str = "QUILL_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub endpoint: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Environment variable holding the bearer token.
    pub key_env: String,
    /// Prompts longer than this many whitespace tokens are refused.
    pub context_limit: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            max_tokens: 256,
            temperature: 0.0,
            key_env: DEFAULT_KEY_ENV.to_string(),
            context_limit: 3000,
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_ms: 250,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Transient failures retried before this answer.
    pub retries: u32,
    pub prompt_tokens: usize,
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<Completion, PromptError>;
}

fn check_context(prompt: &str, limit: usize) -> Result<usize, PromptError> {
    let tokens = prompt_tokens(prompt);
    if tokens > limit {
        return Err(PromptError::ContextLengthExceeded { tokens, limit });
    }
    Ok(tokens)
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate poisoned");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("gate poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpCompletionClient {
    config: ApiConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl std::fmt::Debug for HttpCompletionClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpCompletionClient").field("config", &self.config).finish()
    }
}

enum Attempt {
    Done(String),
    Retry(PromptError),
    Fail(PromptError),
}

impl HttpCompletionClient {
    pub fn new(config: ApiConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate { in_flight: Mutex::new(0), freed: Condvar::new(), cap: config.max_in_flight.max(1) };
        Self { config, agent, gate }
    }

    pub fn config(&self) -> &ApiConfig {
        &self.config
    }

    fn attempt(&self, key: &str, body: &Value) -> Attempt {
        let _slot = self.gate.enter();
        let sent = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body);
        let mut resp = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(PromptError::Timeout),
            Err(e) => return Attempt::Retry(PromptError::ApiError { status: 0, body: e.to_string() }),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(PromptError::Timeout),
            Err(e) => return Attempt::Retry(PromptError::ApiError { status, body: e.to_string() }),
        };
        match status {
            200..=299 => match extract_text(&text) {
                Some(t) => Attempt::Done(t),
                None => Attempt::Fail(PromptError::ApiError { status, body: format!("unrecognized response: {text}") }),
            },
            429 | 500..=599 => Attempt::Retry(PromptError::ApiError { status, body: text }),
            _ => Attempt::Fail(PromptError::ApiError { status, body: text }),
        }
    }
}

/// Pulls the completion text out of the common response shapes.
fn extract_text(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let choice = v.get("choices").and_then(|c| c.get(0));
    let found = [
        choice.and_then(|c| c.get("text")),
        choice.and_then(|c| c.get("message")).and_then(|m| m.get("content")),
        v.get("completion"),
        v.get("text"),
    ]
    .into_iter()
    .flatten()
    .find_map(|t| t.as_str().map(str::to_string));
    found
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, prompt: &str) -> Result<Completion, PromptError> {
        let tokens = check_context(prompt, self.config.context_limit)?;
        let key = std::env::var(&self.config.key_env).map_err(|_| PromptError::MissingCredential(self.config.key_env.clone()))?;
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        });
        let mut retries = 0;
        loop {
            match self.attempt(&key, &body) {
                Attempt::Done(text) => {
                    if retries > 0 {
                        log::info!("completion succeeded after {retries} retries");
                    }
                    return Ok(Completion { text, retries, prompt_tokens: tokens });
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if retries >= self.config.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    retries += 1;
                    let wait = self.config.backoff_ms.saturating_mul(1 << (retries - 1).min(10));
                    log::warn!("completion attempt failed ({e}); retry {retries} in {wait} ms");
                    thread::sleep(Duration::from_millis(wait));
                }
            }
        }
    }
}

/// Offline stand-ins for a completion API.
#[derive(Debug)]
pub enum MockLlm {
    /// Always answers with this text.
    Canned(String),
    /// Answers with the gold tags of the target sentence, looked up by its
    /// text, and all `O` for unknown sentences.
    Gold(HashMap<String, String>),
    /// One `O` per target token.
    AllOutside,
    /// Plays back the queued outcomes in order, then all `O`.
    Scripted(Mutex<VecDeque<Result<String, PromptError>>>),
}

impl MockLlm {
    pub fn scripted(outcomes: Vec<Result<String, PromptError>>) -> Self {
        MockLlm::Scripted(Mutex::new(outcomes.into()))
    }
}

fn all_outside(prompt: &str) -> String {
    let n = target_sentence(prompt).map_or(0, |s| s.split_whitespace().count());
    format!(" `` {} ''", vec!["O"; n].join(" "))
}

impl CompletionClient for MockLlm {
    fn complete(&self, prompt: &str) -> Result<Completion, PromptError> {
        let text = match self {
            MockLlm::Canned(t) => t.clone(),
            MockLlm::Gold(answers) => match target_sentence(prompt).and_then(|s| answers.get(s)) {
                Some(tags) => format!(" `` {tags} ''"),
                None => all_outside(prompt),
            },
            MockLlm::AllOutside => all_outside(prompt),
            MockLlm::Scripted(queue) => match queue.lock().expect("mock poisoned").pop_front() {
                Some(outcome) => outcome?,
                None => all_outside(prompt),
            },
        };
        Ok(Completion { text, retries: 0, prompt_tokens: prompt_tokens(prompt) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves the given (status, body) replies in order, one per request.
    fn serve(replies: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                let mut auth_ok = false;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization: bearer sk-test") {
                        auth_ok = true;
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let (status, body) = if auth_ok { (status, body) } else { (401, "{}") };
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                reader.get_mut().write_all(reply.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}/v1/completions"), hits)
    }

    fn config(endpoint: String, key_env: &str) -> ApiConfig {
        ApiConfig { endpoint, key_env: key_env.into(), backoff_ms: 1, timeout_ms: 5000, ..Default::default() }
    }

    #[test]
    fn retries_after_rate_limit() {
        std::env::set_var("QUILL_TEST_KEY_RETRY", "sk-test");
        let (url, hits) = serve(vec![(429, "{}"), (200, r#"{"choices":[{"text":" `` B-ORG O ''"}]}"#)]);
        let client = HttpCompletionClient::new(config(url, "QUILL_TEST_KEY_RETRY"));
        let c = client.complete("Given the sentence `` a b '' the ner are").unwrap();
        assert_eq!(c.text, " `` B-ORG O ''");
        assert_eq!(c.retries, 1);
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn client_errors_are_not_retried() {
        std::env::set_var("QUILL_TEST_KEY_400", "sk-test");
        let (url, hits) = serve(vec![(400, r#"{"error":"bad"}"#)]);
        let client = HttpCompletionClient::new(config(url, "QUILL_TEST_KEY_400"));
        let err = client.complete("p").unwrap_err();
        assert!(matches!(err, PromptError::ApiError { status: 400, .. }));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn over_limit_prompt_never_reaches_the_network() {
        let mut cfg = config("http://127.0.0.1:1/".into(), "QUILL_TEST_KEY_UNSET");
        cfg.context_limit = 3;
        let client = HttpCompletionClient::new(cfg);
        assert_eq!(client.complete("a b c d"), Err(PromptError::ContextLengthExceeded { tokens: 4, limit: 3 }));
    }

    #[test]
    fn missing_key() {
        let client = HttpCompletionClient::new(config("http://127.0.0.1:1/".into(), "QUILL_TEST_KEY_UNSET"));
        assert_eq!(client.complete("a"), Err(PromptError::MissingCredential("QUILL_TEST_KEY_UNSET".into())));
    }

    #[test]
    fn response_shapes() {
        assert_eq!(extract_text(r#"{"choices":[{"message":{"content":"x"}}]}"#).as_deref(), Some("x"));
        assert_eq!(extract_text(r#"{"completion":"y"}"#).as_deref(), Some("y"));
        assert_eq!(extract_text(r#"{"nope":1}"#), None);
    }

    #[test]
    fn mocks() {
        let prompt = "Given the sentence `` a '' the ner are `` O ''\n\nGiven the sentence `` Bob runs '' the ner are";
        assert_eq!(MockLlm::Canned("`` x ''".into()).complete(prompt).unwrap().text, "`` x ''");
        assert_eq!(MockLlm::AllOutside.complete(prompt).unwrap().text, " `` O O ''");
        let gold = MockLlm::Gold([("Bob runs".to_string(), "B-PER O".to_string())].into());
        assert_eq!(gold.complete(prompt).unwrap().text, " `` B-PER O ''");
        let s = MockLlm::scripted(vec![Err(PromptError::Timeout)]);
        assert_eq!(s.complete(prompt), Err(PromptError::Timeout));
        assert_eq!(s.complete(prompt).unwrap().text, " `` O O ''");
    }
}
