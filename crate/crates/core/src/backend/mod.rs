//! Chat-completion backends: the trait, deterministic test backends, a
//! concurrency limiter and an OpenAI-compatible HTTP client.

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::util::fnv1a64_hex;

#[cfg(feature = "http")]
mod openai;
mod scripted;

#[cfg(feature = "http")]
pub use openai::OpenAiBackend;
pub use scripted::{EchoBackend, ScriptedBackend, TranscriptEntry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("no scripted response for request fingerprint {0}")]
    MissingScript(String),
    #[error("http error: {0}")]
    Http(String),
    #[error("api error: {0}")]
    Api(String),
    #[error("request timed out after {0:?}")]
    Timeout(std::time::Duration),
}

/// A chat-completion endpoint. Implementations must tolerate concurrent
/// `complete` calls; every call is accounted exactly once by the caller.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// Stable fingerprint of a request's system prompt and messages. Scripted
/// transcripts key on this; temperature and token limits are deliberately
/// excluded so replay survives config tweaks.
pub fn request_fingerprint(request: &ChatRequest) -> String {
    let mut buf = Vec::new();
    buf.extend_from_slice(request.system.as_bytes());
    for m in &request.messages {
        buf.push(0x1f);
        buf.extend_from_slice(m.role.as_bytes());
        buf.push(0x1e);
        buf.extend_from_slice(m.content.as_bytes());
    }
    fnv1a64_hex(&buf)
}

/// Deterministic token estimate for backends that do not report usage:
/// whitespace-delimited word count.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

pub fn request_prompt_tokens(request: &ChatRequest) -> u64 {
    approx_tokens(&request.system)
        + request
            .messages
            .iter()
            .map(|m| approx_tokens(&m.content))
            .sum::<u64>()
}

/// Caps in-flight `complete` calls with a semaphore. All workflow and
/// executor concurrency funnels through one of these, so the configured
/// limit holds globally no matter how nodes fan out.
pub struct BoundedBackend {
    inner: Arc<dyn ChatBackend>,
    semaphore: Semaphore,
}

impl BoundedBackend {
    pub fn new(inner: Arc<dyn ChatBackend>, limit: usize) -> BoundedBackend {
        BoundedBackend { inner, semaphore: Semaphore::new(limit.max(1)) }
    }
}

#[async_trait]
impl ChatBackend for BoundedBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let _permit = self
            .semaphore
            .acquire()
            .await
            .expect("semaphore never closed");
        self.inner.complete(request).await
    }
}

/// Connection settings for a real endpoint. The API key is read from the
/// named environment variable at request time; the key itself never lives
/// in config files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for BackendConfig {
    fn default() -> BackendConfig {
        BackendConfig {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-oss-120b".into(),
            api_key_env: None,
            timeout_secs: 120,
            retries: 2,
        }
    }
}
