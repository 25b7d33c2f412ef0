//! Live chat-completions client: an OpenAI-style JSON wire shape with
//! per-provider adapters (role names, field locations, credentials env var)
//! declared in a provider config file. Transient failures retry with
//! exponential backoff and jitter; a shared rate limiter and in-flight cap
//! bound concurrent use of one provider.

use std::fs;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{validate_messages, BackendError, ChatBackend, ChatMessage, GenerationParams};
use crate::inventory::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleNames {
    pub system: String,
    pub user: String,
    pub assistant: String,
}

impl Default for RoleNames {
    fn default() -> Self {
        RoleNames {
            system: "system".into(),
            user: "user".into(),
            assistant: "assistant".into(),
        }
    }
}

fn default_auth_header() -> String {
    "Authorization".into()
}
fn default_auth_prefix() -> String {
    "Bearer ".into()
}
fn default_temperature_field() -> String {
    "temperature".into()
}
fn default_max_tokens_field() -> String {
    "max_tokens".into()
}
fn default_seed_field() -> Option<String> {
    Some("seed".into())
}
fn default_max_attempts() -> u32 {
    5
}
fn default_initial_backoff_ms() -> u64 {
    250
}
fn default_max_backoff_ms() -> u64 {
    8_000
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_max_in_flight() -> usize {
    4
}

/// Adapter declaration for one provider. Credentials come from the named
/// environment variable, never from the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub schema_version: u32,
    pub name: String,
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub credential_env: String,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default)]
    pub role_names: RoleNames,
    #[serde(default = "default_temperature_field")]
    pub temperature_field: String,
    #[serde(default = "default_max_tokens_field")]
    pub max_tokens_field: String,
    /// Field for the sampling seed; null disables sending seeds.
    #[serde(default = "default_seed_field")]
    pub seed_field: Option<String>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_initial_backoff_ms")]
    pub initial_backoff_ms: u64,
    #[serde(default = "default_max_backoff_ms")]
    pub max_backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Minimum spacing between request starts; 0 disables rate limiting.
    #[serde(default)]
    pub min_request_interval_ms: u64,
}

impl ProviderConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<ProviderConfig, BackendError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            BackendError::Provider(format!("cannot read {}: {e}", path.display()))
        })?;
        let config: ProviderConfig = serde_json::from_str(&text).map_err(|e| {
            BackendError::Provider(format!("{}: {e}", path.display()))
        })?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(BackendError::Provider(format!(
                "unsupported schema_version {}",
                config.schema_version
            )));
        }
        Ok(config)
    }
}

/// The JSON request body for one call, following the provider's adapter.
pub fn build_request_body(
    provider: &ProviderConfig,
    model: &str,
    messages: &[ChatMessage],
    params: &GenerationParams,
) -> Value {
    let mapped: Vec<Value> = messages
        .iter()
        .map(|m| {
            let role = match m.role {
                super::Role::System => &provider.role_names.system,
                super::Role::User => &provider.role_names.user,
                super::Role::Assistant => &provider.role_names.assistant,
            };
            json!({ "role": role, "content": m.content })
        })
        .collect();
    let mut body = json!({ "model": model, "messages": mapped });
    let obj = body.as_object_mut().expect("body is an object");
    obj.insert(provider.temperature_field.clone(), json!(params.temperature));
    obj.insert(provider.max_tokens_field.clone(), json!(params.max_tokens));
    if let (Some(field), Some(seed)) = (&provider.seed_field, params.seed) {
        obj.insert(field.clone(), json!(seed));
    }
    body
}

/// Pull the assistant text out of a chat-completions response.
pub fn extract_reply(value: &Value) -> Result<String, BackendError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            BackendError::MalformedResponse(format!(
                "no choices[0].message.content in {value}"
            ))
        })
}

/// How a failed attempt should be handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    /// Transient: back off and retry.
    Retry,
    /// Credentials problem: fatal immediately.
    Auth,
    /// Anything else: fatal.
    Fatal,
}

/// Classification of HTTP status codes for the retry loop.
pub fn classify_status(code: u16) -> Disposition {
    match code {
        401 | 403 => Disposition::Auth,
        408 | 429 => Disposition::Retry,
        c if c >= 500 => Disposition::Retry,
        _ => Disposition::Fatal,
    }
}

/// Exponential backoff with multiplicative jitter in [0.5, 1.0), capped.
pub fn backoff_delay(attempt: u32, base_ms: u64, cap_ms: u64, rng: &mut impl Rng) -> Duration {
    let exp = base_ms.saturating_mul(1u64 << attempt.min(16)).min(cap_ms);
    let jitter = 0.5 + 0.5 * rng.random::<f64>();
    Duration::from_millis((exp as f64 * jitter) as u64)
}

/// Spaces request starts at least `min_interval` apart across threads.
pub struct RateLimiter {
    min_interval: Duration,
    next_free: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> RateLimiter {
        RateLimiter {
            min_interval,
            next_free: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wait_until = {
            let mut next = self.next_free.lock().expect("rate limiter lock");
            let now = Instant::now();
            let start = match *next {
                Some(t) if t > now => t,
                _ => now,
            };
            *next = Some(start + self.min_interval);
            start
        };
        let now = Instant::now();
        if wait_until > now {
            std::thread::sleep(wait_until - now);
        }
    }
}

/// Counting semaphore bounding concurrent in-flight requests.
pub struct InFlightGate {
    cap: usize,
    state: Mutex<usize>,
    freed: Condvar,
}

impl InFlightGate {
    pub fn new(cap: usize) -> InFlightGate {
        InFlightGate {
            cap: cap.max(1),
            state: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn enter(&self) -> InFlightGuard<'_> {
        let mut active = self.state.lock().expect("gate lock");
        while *active >= self.cap {
            active = self.freed.wait(active).expect("gate wait");
        }
        *active += 1;
        InFlightGuard { gate: self }
    }
}

pub struct InFlightGuard<'a> {
    gate: &'a InFlightGate,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.gate.state.lock().expect("gate lock");
        *active -= 1;
        self.gate.freed.notify_one();
    }
}

/// Live HTTP chat backend. One instance per provider+model; share it across
/// sessions so the rate limiter and in-flight cap actually bind.
pub struct HttpChatBackend {
    provider: ProviderConfig,
    model: String,
    agent: ureq::Agent,
    limiter: RateLimiter,
    gate: InFlightGate,
}

impl HttpChatBackend {
    pub fn new(provider: ProviderConfig, model: String) -> HttpChatBackend {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(provider.timeout_ms)))
            .build();
        HttpChatBackend {
            agent: ureq::Agent::new_with_config(config),
            limiter: RateLimiter::new(Duration::from_millis(provider.min_request_interval_ms)),
            gate: InFlightGate::new(provider.max_in_flight),
            provider,
            model,
        }
    }

    fn credential(&self) -> Result<String, BackendError> {
        std::env::var(&self.provider.credential_env).map_err(|_| {
            BackendError::Auth(format!(
                "environment variable {} is not set",
                self.provider.credential_env
            ))
        })
    }

    fn attempt(&self, body: &Value, credential: &str) -> Result<String, AttemptError> {
        let _guard = self.gate.enter();
        self.limiter.acquire();
        let auth_value = format!("{}{credential}", self.provider.auth_prefix);
        let result = self
            .agent
            .post(&self.provider.endpoint)
            .header(&self.provider.auth_header, &auth_value)
            .header("Content-Type", "application/json")
            .send_json(body);
        match result {
            Ok(mut resp) => {
                let value: Value = resp
                    .body_mut()
                    .read_json()
                    .map_err(|e| AttemptError::Fatal(BackendError::MalformedResponse(e.to_string())))?;
                extract_reply(&value).map_err(AttemptError::Fatal)
            }
            Err(ureq::Error::StatusCode(code)) => match classify_status(code) {
                Disposition::Auth => Err(AttemptError::Fatal(BackendError::Auth(format!(
                    "http status {code}"
                )))),
                Disposition::Retry => Err(AttemptError::Transient { status: Some(code) }),
                Disposition::Fatal => Err(AttemptError::Fatal(BackendError::Transport(format!(
                    "http status {code}"
                )))),
            },
            Err(ureq::Error::Timeout(t)) => {
                let _ = t;
                Err(AttemptError::Transient { status: None })
            }
            Err(ureq::Error::Io(e)) => Err(AttemptError::Transient {
                status: e.raw_os_error().map(|_| 0),
            }),
            Err(e) => Err(AttemptError::Fatal(BackendError::Transport(e.to_string()))),
        }
    }
}

enum AttemptError {
    Transient { status: Option<u16> },
    Fatal(BackendError),
}

impl ChatBackend for HttpChatBackend {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        validate_messages(messages)?;
        params.validate()?;
        let credential = self.credential()?;
        let body = build_request_body(&self.provider, &self.model, messages, params);
        let mut rng = rand::rng();
        let mut last_status: Option<u16> = None;
        for attempt in 0..self.provider.max_attempts {
            match self.attempt(&body, &credential) {
                Ok(reply) => return Ok(reply),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient { status }) => {
                    last_status = status.or(last_status);
                    if attempt + 1 < self.provider.max_attempts {
                        std::thread::sleep(backoff_delay(
                            attempt,
                            self.provider.initial_backoff_ms,
                            self.provider.max_backoff_ms,
                            &mut rng,
                        ));
                    }
                }
            }
        }
        if last_status == Some(429) {
            Err(BackendError::RateLimitExhausted {
                attempts: self.provider.max_attempts,
            })
        } else {
            Err(BackendError::Transport(format!(
                "still failing after {} attempts (last status {:?})",
                self.provider.max_attempts, last_status
            )))
        }
    }

    fn model_id(&self) -> String {
        format!("{}:{}", self.provider.name, self.model)
    }
}
