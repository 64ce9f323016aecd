//! OpenAI-compatible chat-completion client with retry and token
//! accounting. Works against any endpoint speaking the `/chat/completions`
//! wire format.

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;

use super::{approx_tokens, BackendConfig, BackendError, ChatBackend, ChatRequest, ChatResponse};

pub struct OpenAiBackend {
    config: BackendConfig,
    client: reqwest::Client,
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct ApiChoice {
    message: ApiMessage,
}

#[derive(Deserialize)]
struct ApiMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ApiUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

impl OpenAiBackend {
    pub fn new(config: BackendConfig) -> Result<OpenAiBackend, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Http(e.to_string()))?;
        Ok(OpenAiBackend { config, client })
    }

    fn api_key(&self) -> Option<String> {
        self.config
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
    }

    async fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut messages = vec![json!({"role": "system", "content": request.system})];
        for m in &request.messages {
            messages.push(json!({"role": m.role, "content": m.content}));
        }
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });

        let mut http = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = self.api_key() {
            http = http.bearer_auth(key);
        }
        let response = http.send().await.map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(std::time::Duration::from_secs(self.config.timeout_secs))
            } else {
                BackendError::Http(e.to_string())
            }
        })?;
        let status = response.status();
        let text = response
            .text()
            .await
            .map_err(|e| BackendError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Api(format!("{status}: {text}")));
        }
        let parsed: ApiResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Api(e.to_string()))?;
        let content = parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| BackendError::Api("response had no choices".into()))?;
        let usage = parsed.usage.unwrap_or(ApiUsage { prompt_tokens: None, completion_tokens: None });
        Ok(ChatResponse {
            prompt_tokens: usage
                .prompt_tokens
                .unwrap_or_else(|| super::request_prompt_tokens(request)),
            completion_tokens: usage
                .completion_tokens
                .unwrap_or_else(|| approx_tokens(&content)),
            content,
        })
    }
}

#[async_trait]
impl ChatBackend for OpenAiBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut last_err = BackendError::Api("no attempts made".into());
        for attempt in 0..=self.config.retries {
            match self.attempt(request).await {
                Ok(resp) => return Ok(resp),
                Err(e) => {
                    last_err = e;
                    if attempt < self.config.retries {
                        let backoff = std::time::Duration::from_millis(200 * (1 << attempt));
                        tokio::time::sleep(backoff).await;
                    }
                }
            }
        }
        Err(last_err)
    }
}
