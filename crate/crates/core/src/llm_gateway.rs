//! Pluggable text-generation backends: a JSON-over-HTTP completion client
//! and a deterministic scripted mock for offline runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::hashing::{fnv1a64, hex64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_sequences: Option<Vec<String>>,
}

impl GenerationRequest {
    /// Deterministic decoding for classification and inference prompts.
    pub fn classification(prompt: impl Into<String>) -> GenerationRequest {
        GenerationRequest {
            prompt: prompt.into(),
            max_tokens: 1024,
            temperature: 0.0,
            stop_sequences: None,
        }
    }

    /// Sampling decode for corpus generation, where diversity is wanted.
    pub fn generation(prompt: impl Into<String>) -> GenerationRequest {
        GenerationRequest {
            prompt: prompt.into(),
            max_tokens: 1024,
            temperature: 0.7,
            stop_sequences: None,
        }
    }

    fn validate(&self) -> CoreResult<()> {
        if self.prompt.is_empty() {
            return Err(CoreError::Config("prompt must be non-empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(CoreError::Config("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures: Option<PathBuf>,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_max_concurrent() -> usize {
    4
}

impl BackendDescriptor {
    pub fn mock(fixtures: impl Into<PathBuf>) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            fixtures: Some(fixtures.into()),
            max_concurrent: default_max_concurrent(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model: impl Into<String>) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::Http,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            fixtures: None,
            max_concurrent: default_max_concurrent(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        match self.kind {
            BackendKind::Http => {
                if self.endpoint.as_deref().unwrap_or("").is_empty() {
                    return Err(CoreError::Config("http backend requires an endpoint".into()));
                }
                if self.model.as_deref().unwrap_or("").is_empty() {
                    return Err(CoreError::Config("http backend requires a model name".into()));
                }
            }
            BackendKind::Mock => {
                if self.fixtures.is_none() {
                    return Err(CoreError::Config("mock backend requires a fixtures path".into()));
                }
            }
        }
        if self.max_concurrent == 0 {
            return Err(CoreError::Config("max_concurrent must be at least 1".into()));
        }
        Ok(())
    }
}

/// A text-generation backend. Implementations are shareable across threads.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> CoreResult<String>;
}

/// Fixture key: FNV-1a over the trailing-whitespace-trimmed prompt bytes.
/// Byte-level prompt changes intentionally invalidate fixtures.
pub fn prompt_fixture_key(prompt: &str) -> String {
    hex64(fnv1a64(prompt.trim_end().as_bytes()))
}

/// Scripted backend: a pure function of (prompt, fixtures). Misses are hard
/// errors, never silent defaults.
pub struct MockBackend {
    fixtures: BTreeMap<String, String>,
}

impl MockBackend {
    pub fn new(fixtures: BTreeMap<String, String>) -> MockBackend {
        MockBackend { fixtures }
    }

    pub fn from_file(path: &Path) -> CoreResult<MockBackend> {
        let body = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let fixtures: BTreeMap<String, String> = serde_json::from_str(&body)
            .map_err(|e| CoreError::schema(path, 1, format!("fixtures map: {e}")))?;
        Ok(MockBackend { fixtures })
    }

    /// Script a completion for a prompt (test and fixture-builder support).
    pub fn insert(&mut self, prompt: &str, completion: impl Into<String>) {
        self.fixtures.insert(prompt_fixture_key(prompt), completion.into());
    }

    pub fn fixtures(&self) -> &BTreeMap<String, String> {
        &self.fixtures
    }
}

impl TextGenerator for MockBackend {
    fn generate(&self, req: &GenerationRequest) -> CoreResult<String> {
        req.validate()?;
        let key = prompt_fixture_key(&req.prompt);
        self.fixtures
            .get(&key)
            .cloned()
            .ok_or(CoreError::FixtureMiss { hash: key })
    }
}

/// Save a fixtures map as canonical JSON (sorted keys, pretty-printed).
pub fn save_fixtures(fixtures: &BTreeMap<String, String>, path: &Path) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let body = serde_json::to_string_pretty(fixtures)
        .map_err(|e| CoreError::Data(format!("serializing fixtures: {e}")))?;
    std::fs::write(path, body + "\n").map_err(|e| CoreError::io(path, e))
}

/// Counting semaphore bounding in-flight requests.
struct ConcurrencyGate {
    state: Mutex<usize>,
    cv: Condvar,
    cap: usize,
}

impl ConcurrencyGate {
    fn new(cap: usize) -> ConcurrencyGate {
        ConcurrencyGate {
            state: Mutex::new(0),
            cv: Condvar::new(),
            cap,
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut in_flight = self.state.lock().unwrap();
        while *in_flight >= self.cap {
            in_flight = self.cv.wait(in_flight).unwrap();
        }
        *in_flight += 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a ConcurrencyGate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.gate.state.lock().unwrap();
        *in_flight -= 1;
        self.gate.cv.notify_one();
    }
}

/// JSON-over-HTTP completion backend with bounded concurrency and
/// exponential-backoff retries.
pub struct HttpBackend {
    endpoint: String,
    model: String,
    retry: RetryPolicy,
    gate: ConcurrencyGate,
}

impl HttpBackend {
    pub fn new(descriptor: &BackendDescriptor) -> CoreResult<HttpBackend> {
        descriptor.validate()?;
        if descriptor.kind != BackendKind::Http {
            return Err(CoreError::Config("descriptor is not an http backend".into()));
        }
        Ok(HttpBackend {
            endpoint: descriptor.endpoint.clone().unwrap(),
            model: descriptor.model.clone().unwrap(),
            retry: descriptor.retry,
            gate: ConcurrencyGate::new(descriptor.max_concurrent),
        })
    }

    fn call_once(&self, req: &GenerationRequest) -> CoreResult<String> {
        let mut body = serde_json::json!({
            "model": self.model,
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        if let Some(stop) = &req.stop_sequences {
            body["stop"] = serde_json::json!(stop);
        }
        let mut response = ureq::post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => CoreError::Backend {
                    status: code,
                    msg: format!("completion endpoint returned {code}"),
                },
                other => CoreError::Network {
                    query: truncate(&req.prompt, 80),
                    msg: other.to_string(),
                },
            })?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| CoreError::Network {
                query: truncate(&req.prompt, 80),
                msg: e.to_string(),
            })?;
        extract_completion(&text)
    }
}

impl TextGenerator for HttpBackend {
    fn generate(&self, req: &GenerationRequest) -> CoreResult<String> {
        req.validate()?;
        let _guard = self.gate.acquire();
        let mut last_err = None;
        for attempt in 0..self.retry.max_attempts.max(1) {
            if attempt > 0 {
                let backoff = self.retry.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.call_once(req) {
                Ok(text) => return Ok(text),
                Err(e @ (CoreError::Network { .. } | CoreError::Backend { .. })) => {
                    last_err = Some(e);
                }
                Err(other) => return Err(other),
            }
        }
        Err(last_err.unwrap_or_else(|| CoreError::Backend {
            status: 0,
            msg: "no attempts made".into(),
        }))
    }
}

/// Pull the first completion's text out of a JSON response body.
fn extract_completion(body: &str) -> CoreResult<String> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| CoreError::MalformedResponse {
            msg: format!("completion response: {e}"),
            excerpt: body.chars().take(200).collect(),
        })?;
    let first_choice = value.get("choices").and_then(|c| c.get(0));
    let text = first_choice
        .and_then(|c| c.get("text"))
        .and_then(|t| t.as_str())
        .or_else(|| {
            first_choice
                .and_then(|c| c.get("message"))
                .and_then(|m| m.get("content"))
                .and_then(|t| t.as_str())
        })
        .or_else(|| value.get("text").and_then(|t| t.as_str()))
        .or_else(|| value.get("completion").and_then(|t| t.as_str()));
    text.map(str::to_string).ok_or_else(|| CoreError::MalformedResponse {
        msg: "no completion text in response".into(),
        excerpt: body.chars().take(200).collect(),
    })
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

/// Build a backend from its descriptor.
pub fn build_backend(descriptor: &BackendDescriptor) -> CoreResult<Box<dyn TextGenerator>> {
    descriptor.validate()?;
    match descriptor.kind {
        BackendKind::Mock => {
            let path = descriptor.fixtures.as_ref().unwrap();
            Ok(Box::new(MockBackend::from_file(path)?))
        }
        BackendKind::Http => Ok(Box::new(HttpBackend::new(descriptor)?)),
    }
}
