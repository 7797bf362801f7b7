//! Language-model access.
//!
//! Four backends share the [`LlmClient`] trait:
//!
//! - `Live`: OpenAI-compatible `POST {endpoint}/chat/completions`
//! - `Record`: `Live`, appending every exchange to a JSONL cassette
//! - `Replay`: answers from a cassette keyed by [`canonical_request_hash`]
//! - `Scripted`: per-task queues of canned answers, for tests
//!
//! Requests are single-turn: an optional system message and one user message.

mod cassette;
mod hash;
mod http;
mod scripted;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cassette::{load_cassette, record, replay, CassetteEntry, RecordingClient, ReplayClient};
pub use hash::{canonical_request_bytes, canonical_request_hash};
pub use http::{LiveClient, RateLimiter};
pub use scripted::{ScriptEntry, ScriptedClient};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    #[serde(default)]
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.user.is_empty() {
            return Err(LlmError::InvalidRequest("user message is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub prompt_tokens: u32,
    #[serde(default)]
    pub completion_tokens: u32,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            prompt_tokens: 0,
            completion_tokens: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Record,
    Replay,
    Scripted,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Self::Live),
            "record" => Ok(Self::Record),
            "replay" => Ok(Self::Replay),
            "scripted" => Ok(Self::Scripted),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_seconds: u64,
    pub max_retries: u32,
    pub backend: BackendKind,
    /// Cassette for Record/Replay, script file for Scripted.
    pub cassette: Option<PathBuf>,
    /// 0 disables rate limiting.
    pub requests_per_minute: u32,
    /// First retry delay; doubles on every further retry.
    pub backoff_base_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_seconds: 120,
            max_retries: 3,
            backend: BackendKind::Live,
            cassette: None,
            requests_per_minute: 60,
            backoff_base_ms: 1000,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        match self.backend {
            BackendKind::Live | BackendKind::Record if self.endpoint_url.is_none() => {
                Err(LlmError::Config(format!(
                    "{:?} backend requires an endpoint url",
                    self.backend
                )))
            }
            BackendKind::Record | BackendKind::Replay | BackendKind::Scripted
                if self.cassette.is_none() =>
            {
                Err(LlmError::Config(format!(
                    "{:?} backend requires a cassette/script path",
                    self.backend
                )))
            }
            _ if self.timeout_seconds == 0 => {
                Err(LlmError::Config("timeout must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication rejected (HTTP {status})")]
    AuthError { status: u16 },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("model returned an empty completion")]
    EmptyCompletion,
    #[error("no cassette entry for request {digest}")]
    CassetteMiss { digest: String },
    #[error("corrupt cassette at line {line}: {reason}")]
    CorruptCassette { line: usize, reason: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid provider config: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("script exhausted for task {task:?}")]
    ScriptExhausted { task: String },
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A chat-completion backend.
///
/// `task_id` identifies the benchmark task the call belongs to. Only the
/// scripted backend uses it (to pick a per-task queue); the request hash
/// never includes it.
pub trait LlmClient: Send + Sync {
    fn complete(&self, task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(task_id, req)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for std::sync::Arc<T> {
    fn complete(&self, task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(task_id, req)
    }
}

pub(crate) fn non_empty(resp: ChatResponse) -> Result<ChatResponse, LlmError> {
    if resp.text.is_empty() {
        Err(LlmError::EmptyCompletion)
    } else {
        Ok(resp)
    }
}

/// Builds the backend described by `cfg`.
pub fn connect(cfg: &ProviderConfig) -> Result<Box<dyn LlmClient>, LlmError> {
    cfg.validate()?;
    Ok(match cfg.backend {
        BackendKind::Live => Box::new(LiveClient::from_config(cfg)?),
        BackendKind::Record => Box::new(RecordingClient::new(
            LiveClient::from_config(cfg)?,
            cfg.cassette.clone().expect("validated"),
        )),
        BackendKind::Replay => Box::new(ReplayClient::open(
            cfg.cassette.as_ref().expect("validated"),
        )?),
        BackendKind::Scripted => Box::new(ScriptedClient::from_file(
            cfg.cassette.as_ref().expect("validated"),
        )?),
    })
}

/// One-shot completion through a freshly built backend.
pub fn complete(req: &ChatRequest, cfg: &ProviderConfig) -> Result<ChatResponse, LlmError> {
    req.validate()?;
    connect(cfg)?.complete("", req)
}

/// Wraps a client and counts successful and failed calls.
pub struct CountingClient<C> {
    inner: C,
    calls: AtomicU64,
}

impl<C: LlmClient> CountingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: LlmClient> LlmClient for CountingClient<C> {
    fn complete(&self, task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(task_id, req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(user: &str) -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            system: String::new(),
            user: user.into(),
            temperature: 0.0,
            max_tokens: 16,
        }
    }

    #[test]
    fn request_validation() {
        assert!(req("hi").validate().is_ok());
        assert!(req("").validate().is_err());
        let mut r = req("hi");
        r.temperature = 2.5;
        assert!(r.validate().is_err());
        r.temperature = 2.0;
        assert!(r.validate().is_ok());
    }

    #[test]
    fn provider_config_guards() {
        let mut cfg = ProviderConfig::default();
        assert!(cfg.validate().is_err(), "live without endpoint");
        cfg.endpoint_url = Some("http://localhost:1".into());
        assert!(cfg.validate().is_ok());
        cfg.backend = BackendKind::Replay;
        assert!(cfg.validate().is_err(), "replay without cassette");
        cfg.cassette = Some("c.jsonl".into());
        assert!(cfg.validate().is_ok());
        cfg.backend = BackendKind::Scripted;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn counting_wrapper_counts() {
        let c = CountingClient::new(ScriptedClient::from_queue(["A", "B"]));
        c.complete("t", &req("x")).unwrap();
        c.complete("t", &req("x")).unwrap();
        assert!(c.complete("t", &req("x")).is_err());
        assert_eq!(c.calls(), 3);
    }
}
