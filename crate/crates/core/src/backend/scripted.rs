//! Deterministic backends for replay and testing.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{
    approx_tokens, request_fingerprint, request_prompt_tokens, BackendError, ChatBackend,
    ChatRequest, ChatResponse,
};

/// One canned response in a transcript file. Token counts default to
/// deterministic word-count estimates when omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub content: String,
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

/// Replays canned responses keyed by request fingerprint. Requests with no
/// scripted entry fail with [`BackendError::MissingScript`]; a `fallback`
/// response can be installed instead for fixtures that only care about a
/// few requests.
#[derive(Default)]
pub struct ScriptedBackend {
    entries: Mutex<HashMap<String, TranscriptEntry>>,
    fallback: Option<String>,
}

impl ScriptedBackend {
    pub fn new() -> ScriptedBackend {
        ScriptedBackend::default()
    }

    pub fn with_fallback(fallback: impl Into<String>) -> ScriptedBackend {
        ScriptedBackend { entries: Mutex::new(HashMap::new()), fallback: Some(fallback.into()) }
    }

    /// Loads a line-delimited transcript file of [`TranscriptEntry`] records.
    pub fn from_transcript_file(path: &Path) -> std::io::Result<ScriptedBackend> {
        let text = std::fs::read_to_string(path)?;
        let backend = ScriptedBackend::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let entry: TranscriptEntry = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            backend.entries.lock().unwrap().insert(entry.fingerprint.clone(), entry);
        }
        Ok(backend)
    }

    /// Scripts `content` as the response for exactly this request.
    pub fn respond_to(&self, request: &ChatRequest, content: impl Into<String>) {
        let fingerprint = request_fingerprint(request);
        self.entries.lock().unwrap().insert(
            fingerprint.clone(),
            TranscriptEntry { fingerprint, content: content.into(), prompt_tokens: None, completion_tokens: None },
        );
    }

    pub fn insert(&self, entry: TranscriptEntry) {
        self.entries.lock().unwrap().insert(entry.fingerprint.clone(), entry);
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap().values().cloned().collect()
    }
}

#[async_trait]
impl ChatBackend for ScriptedBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let fingerprint = request_fingerprint(request);
        let entry = self.entries.lock().unwrap().get(&fingerprint).cloned();
        let (content, prompt_tokens, completion_tokens) = match entry {
            Some(e) => (
                e.content,
                e.prompt_tokens.unwrap_or_else(|| request_prompt_tokens(request)),
                e.completion_tokens,
            ),
            None => match &self.fallback {
                Some(f) => (f.clone(), request_prompt_tokens(request), None),
                None => return Err(BackendError::MissingScript(fingerprint)),
            },
        };
        let completion_tokens = completion_tokens.unwrap_or_else(|| approx_tokens(&content));
        Ok(ChatResponse { content, prompt_tokens, completion_tokens })
    }
}

/// Answers every request with a deterministic digest of the request
/// content, wrapped in the tagged output convention. Useful for exercising
/// data flow: distinct inputs produce distinct answers.
#[derive(Default)]
pub struct EchoBackend;

#[async_trait]
impl ChatBackend for EchoBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let last = request.messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let content = format!("<thinking>echo</thinking><answer>echo({last})</answer>");
        Ok(ChatResponse {
            content: content.clone(),
            prompt_tokens: request_prompt_tokens(request),
            completion_tokens: approx_tokens(&content),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Message;

    fn req(content: &str) -> ChatRequest {
        ChatRequest {
            system: "s".into(),
            messages: vec![Message::user(content)],
            temperature: 0.5,
            max_tokens: 512,
        }
    }

    #[tokio::test]
    async fn scripted_replays_and_rejects() {
        let backend = ScriptedBackend::new();
        backend.respond_to(&req("q1"), "<answer>42</answer>");
        let resp = backend.complete(&req("q1")).await.unwrap();
        assert_eq!(resp.content, "<answer>42</answer>");
        assert!(matches!(
            backend.complete(&req("unseen")).await,
            Err(BackendError::MissingScript(_))
        ));
    }

    #[tokio::test]
    async fn transcript_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("maestro-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("transcript.jsonl");
        let backend = ScriptedBackend::new();
        backend.respond_to(&req("q"), "reply");
        let lines: Vec<String> = backend
            .entries()
            .iter()
            .map(|e| serde_json::to_string(e).unwrap())
            .collect();
        std::fs::write(&path, lines.join("\n")).unwrap();

        let loaded = ScriptedBackend::from_transcript_file(&path).unwrap();
        assert_eq!(loaded.complete(&req("q")).await.unwrap().content, "reply");
        std::fs::remove_dir_all(&dir).ok();
    }
}
