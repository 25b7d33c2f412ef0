//! Uniform chat interface over live APIs, deterministic scripted
//! respondents, and record/replay cassettes.

pub mod cassette;
pub mod http;
pub mod scripted;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::System => f.write_str("system"),
            Role::User => f.write_str("user"),
            Role::Assistant => f.write_str("assistant"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Sampling settings for one call. Temperature defaults to 0 everywhere;
/// only the temperature sensitivity factor overrides it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            seed: None,
            max_tokens: 64,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be a non-negative real, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which respondent to talk to. Serialized into transcripts for provenance;
/// parseable from compact CLI strings like `constant:A` or
/// `noisy-table:p=0.1,seed=7`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    HttpChat {
        /// Path to the provider adapter config.
        provider: String,
        model: String,
    },
    Constant {
        reply: String,
    },
    HistoryMajority {
        fallback: String,
    },
    NoisyTable {
        flip_prob: f64,
        seed: u64,
    },
    Replay {
        cassette: PathBuf,
    },
}

impl FromStr for BackendSpec {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, r),
            None => (s, ""),
        };
        match kind {
            "constant" => {
                if rest.is_empty() {
                    return Err(BackendError::Spec("constant backend needs a reply, e.g. constant:A".into()));
                }
                Ok(BackendSpec::Constant { reply: rest.to_string() })
            }
            "history-majority" => Ok(BackendSpec::HistoryMajority {
                fallback: if rest.is_empty() { "A".to_string() } else { rest.to_string() },
            }),
            "noisy-table" => {
                let mut flip_prob = 0.0;
                let mut seed = 0u64;
                for part in rest.split(',').filter(|p| !p.is_empty()) {
                    match part.split_once('=') {
                        Some(("p", v)) => {
                            flip_prob = v.parse().map_err(|_| {
                                BackendError::Spec(format!("bad flip probability {v:?}"))
                            })?
                        }
                        Some(("seed", v)) => {
                            seed = v.parse().map_err(|_| {
                                BackendError::Spec(format!("bad seed {v:?}"))
                            })?
                        }
                        _ => {
                            return Err(BackendError::Spec(format!(
                                "unknown noisy-table option {part:?} (expected p=.. or seed=..)"
                            )))
                        }
                    }
                }
                if !(0.0..=1.0).contains(&flip_prob) {
                    return Err(BackendError::Spec(format!(
                        "flip probability must be in [0,1], got {flip_prob}"
                    )));
                }
                Ok(BackendSpec::NoisyTable { flip_prob, seed })
            }
            "replay" => {
                if rest.is_empty() {
                    return Err(BackendError::Spec("replay backend needs a cassette path".into()));
                }
                Ok(BackendSpec::Replay { cassette: PathBuf::from(rest) })
            }
            "http" => {
                let (provider, model) = rest.split_once(':').ok_or_else(|| {
                    BackendError::Spec("http backend needs http:PROVIDER_CONFIG:MODEL".into())
                })?;
                Ok(BackendSpec::HttpChat {
                    provider: provider.to_string(),
                    model: model.to_string(),
                })
            }
            other => Err(BackendError::Spec(format!("unknown backend kind {other:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limit still exhausted after {attempts} attempts")]
    RateLimitExhausted { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cassette miss for request hash {hash}")]
    CassetteMiss { hash: String },
    #[error("cassette error: {0}")]
    Cassette(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider config error: {0}")]
    Provider(String),
    #[error("invalid backend spec: {0}")]
    Spec(String),
}

/// A chat respondent. Implementations must be safe to share across
/// concurrently running sessions.
pub trait ChatBackend: Send + Sync {
    /// Return the assistant reply for the conversation so far. `messages`
    /// must be non-empty and end with a user turn.
    fn chat(&self, messages: &[ChatMessage], params: &GenerationParams)
        -> Result<String, BackendError>;

    /// Stable identifier folded into request hashes; any change invalidates
    /// recorded cassettes.
    fn model_id(&self) -> String;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        (**self).chat(messages, params)
    }

    fn model_id(&self) -> String {
        (**self).model_id()
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        (**self).chat(messages, params)
    }

    fn model_id(&self) -> String {
        (**self).model_id()
    }
}

pub(crate) fn validate_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    let last = messages
        .last()
        .ok_or_else(|| BackendError::InvalidRequest("message list is empty".into()))?;
    if last.role != Role::User {
        return Err(BackendError::InvalidRequest(format!(
            "last message must be a user turn, got {}",
            last.role
        )));
    }
    for m in messages {
        if m.role != Role::System && m.content.is_empty() {
            return Err(BackendError::InvalidRequest(format!(
                "{} message with empty content",
                m.role
            )));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct HashEnvelope<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    params: &'a GenerationParams,
}

/// Stable hash of (model id, messages, params): hex SHA-256 of the canonical
/// JSON encoding.
pub fn request_hash(model: &str, messages: &[ChatMessage], params: &GenerationParams) -> String {
    let envelope = HashEnvelope {
        model,
        messages,
        params,
    };
    let json = serde_json::to_string(&envelope).expect("hash envelope serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Instantiate the backend a spec describes. Replay cassettes load eagerly;
/// HTTP providers read their adapter config here.
pub fn build_backend(spec: &BackendSpec) -> Result<Box<dyn ChatBackend>, BackendError> {
    match spec {
        BackendSpec::Constant { reply } => Ok(Box::new(scripted::ConstantBackend::new(reply))),
        BackendSpec::HistoryMajority { fallback } => {
            Ok(Box::new(scripted::HistoryMajorityBackend::new(fallback)))
        }
        BackendSpec::NoisyTable { flip_prob, seed } => Ok(Box::new(
            scripted::NoisyTableBackend::new(*flip_prob, *seed)
                .map_err(|e| BackendError::Spec(e))?,
        )),
        BackendSpec::Replay { cassette } => {
            Ok(Box::new(cassette::ReplayBackend::load(cassette)?))
        }
        BackendSpec::HttpChat { provider, model } => {
            let config = http::ProviderConfig::load(provider)?;
            Ok(Box::new(http::HttpChatBackend::new(config, model.clone())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "constant:A".parse::<BackendSpec>().unwrap(),
            BackendSpec::Constant { reply: "A".into() }
        );
        assert_eq!(
            "history-majority:C".parse::<BackendSpec>().unwrap(),
            BackendSpec::HistoryMajority { fallback: "C".into() }
        );
        assert_eq!(
            "noisy-table:p=0.25,seed=42".parse::<BackendSpec>().unwrap(),
            BackendSpec::NoisyTable { flip_prob: 0.25, seed: 42 }
        );
        assert_eq!(
            "replay:runs/a.jsonl".parse::<BackendSpec>().unwrap(),
            BackendSpec::Replay { cassette: PathBuf::from("runs/a.jsonl") }
        );
        assert_eq!(
            "http:providers/openai.json:gpt-x".parse::<BackendSpec>().unwrap(),
            BackendSpec::HttpChat { provider: "providers/openai.json".into(), model: "gpt-x".into() }
        );
        assert!("noisy-table:p=1.5".parse::<BackendSpec>().is_err());
        assert!("wat:x".parse::<BackendSpec>().is_err());
        assert!("constant".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn message_validation() {
        assert!(validate_messages(&[]).is_err());
        assert!(validate_messages(&[ChatMessage::assistant("x")]).is_err());
        assert!(validate_messages(&[ChatMessage::user("")]).is_err());
        assert!(validate_messages(&[ChatMessage::system(""), ChatMessage::user("q")]).is_ok());
    }

    #[test]
    fn hash_covers_model_messages_params() {
        let msgs = vec![ChatMessage::user("hello")];
        let params = GenerationParams::default();
        let base = request_hash("m1", &msgs, &params);
        assert_eq!(base, request_hash("m1", &msgs, &params));
        assert_ne!(base, request_hash("m2", &msgs, &params));
        let msgs2 = vec![ChatMessage::user("hello!")];
        assert_ne!(base, request_hash("m1", &msgs2, &params));
        let params2 = GenerationParams {
            temperature: 0.5,
            ..Default::default()
        };
        assert_ne!(base, request_hash("m1", &msgs, &params2));
        let params3 = GenerationParams {
            seed: Some(7),
            ..Default::default()
        };
        assert_ne!(base, request_hash("m1", &msgs, &params3));
    }

    #[test]
    fn params_validation() {
        assert!(GenerationParams::default().validate().is_ok());
        assert!(GenerationParams {
            temperature: -0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GenerationParams {
            max_tokens: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
