//! Live backend speaking the OpenAI-compatible chat/completions format.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{non_empty, ChatRequest, ChatResponse, LlmClient, LlmError, ProviderConfig};

/// Spaces requests evenly at `requests_per_minute` (burst of one).
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(requests_per_minute: u32) -> Self {
        let interval = if requests_per_minute == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs(60) / requests_per_minute
        };
        Self {
            interval,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    /// Process-wide limiter for a given rate; clients with equal rates share it.
    pub fn shared(requests_per_minute: u32) -> Arc<RateLimiter> {
        static LIMITERS: OnceLock<Mutex<HashMap<u32, Arc<RateLimiter>>>> = OnceLock::new();
        LIMITERS
            .get_or_init(Default::default)
            .lock()
            .unwrap()
            .entry(requests_per_minute)
            .or_insert_with(|| Arc::new(RateLimiter::new(requests_per_minute)))
            .clone()
    }

    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

enum Failure {
    Retryable(LlmError),
    Fatal(LlmError),
}

pub struct LiveClient {
    http: reqwest::blocking::Client,
    url: String,
    api_key: String,
    max_retries: u32,
    backoff_base: Duration,
    limiter: Arc<RateLimiter>,
}

impl LiveClient {
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self, LlmError> {
        let endpoint = cfg
            .endpoint_url
            .as_deref()
            .ok_or_else(|| LlmError::Config("live backend requires an endpoint url".into()))?;
        let api_key = std::env::var(&cfg.api_key_env)
            .map_err(|_| LlmError::MissingApiKey(cfg.api_key_env.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_seconds))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            http,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            api_key,
            max_retries: cfg.max_retries,
            backoff_base: Duration::from_millis(cfg.backoff_base_ms),
            limiter: RateLimiter::shared(cfg.requests_per_minute),
        })
    }

    fn body(req: &ChatRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if !req.system.is_empty() {
            messages.push(json!({"role": "system", "content": req.system}));
        }
        messages.push(json!({"role": "user", "content": req.user}));
        json!({
            "model": req.model_id,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<ChatResponse, Failure> {
        self.limiter.acquire();
        let resp = self
            .http
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    Failure::Retryable(LlmError::Timeout { attempts: 0 })
                } else {
                    Failure::Retryable(LlmError::Transport(e.to_string()))
                }
            })?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| Failure::Retryable(LlmError::Transport(e.to_string())))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(Failure::Fatal(LlmError::AuthError { status })),
            429 => return Err(Failure::Retryable(LlmError::RateLimited { attempts: 0 })),
            500..=599 => return Err(Failure::Retryable(LlmError::Http { status, body: text })),
            _ => return Err(Failure::Fatal(LlmError::Http { status, body: text })),
        }
        let parsed: CompletionBody = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(LlmError::MalformedResponse(e.to_string())))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        let usage = parsed.usage.unwrap_or(Usage {
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        non_empty(ChatResponse {
            text: content,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        })
        .map_err(Failure::Fatal)
    }
}

impl LlmClient for LiveClient {
    fn complete(&self, _task_id: &str, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        req.validate()?;
        let body = Self::body(req);
        let attempts = 1 + self.max_retries;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(&body) {
                Ok(resp) => return Ok(resp),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) => {
                    log::debug!("attempt {} of {attempts} failed: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(match last.expect("at least one attempt") {
            LlmError::RateLimited { .. } => LlmError::RateLimited { attempts },
            LlmError::Timeout { .. } => LlmError::Timeout { attempts },
            other => other,
        })
    }
}
