//! HTTP provider speaking the chat-completions wire format.
//!
//! Configured per model role from the environment:
//! `SR_API_KEY_EXTRACTION`, `SR_MODEL_EXTRACTION`, `SR_API_BASE_EXTRACTION`
//! and the `_DEDUP` equivalents. When no dedup key is set the extraction
//! settings serve both roles.

use serde::Deserialize;
use serde_json::json;

use super::{LlmProvider, LlmRequest, ModelRole, ProviderError};

pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_EXTRACTION_MODEL: &str = "gpt-4o-mini";

#[derive(Debug, Clone)]
pub struct ChatCompletionsProvider {
    client: reqwest::Client,
    base_url: String,
    api_key: String,
    model: String,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl ChatCompletionsProvider {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        ChatCompletionsProvider {
            client: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            model: model.into(),
        }
    }

    /// Reads the settings for `role`; `None` when no API key is configured.
    pub fn from_env(role: ModelRole) -> Option<Self> {
        Self::from_lookup(role, |k| std::env::var(k).ok())
    }

    pub fn from_lookup(role: ModelRole, get: impl Fn(&str) -> Option<String>) -> Option<Self> {
        let suffix = match role {
            ModelRole::Extraction => "EXTRACTION",
            ModelRole::Dedup => "DEDUP",
        };
        let key = get(&format!("SR_API_KEY_{suffix}")).filter(|k| !k.is_empty())?;
        let base = get(&format!("SR_API_BASE_{suffix}")).unwrap_or_else(|| DEFAULT_API_BASE.to_string());
        let model = get(&format!("SR_MODEL_{suffix}"))
            .or_else(|| (role == ModelRole::Extraction).then(|| DEFAULT_EXTRACTION_MODEL.to_string()))?;
        Some(ChatCompletionsProvider::new(base, key, model))
    }

    fn body(&self, request: &LlmRequest) -> serde_json::Value {
        json!({
            "model": self.model,
            "temperature": request.temperature,
            "response_format": {"type": "json_object"},
            "messages": request.messages,
        })
    }
}

#[async_trait::async_trait]
impl LlmProvider for ChatCompletionsProvider {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    async fn send(&self, request: &LlmRequest, _attempt: u32) -> Result<String, ProviderError> {
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&self.body(request))
            .send()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(ProviderError::Auth(format!("{status}: {text}")));
        }
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(ProviderError::Transport(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Err(ProviderError::Rejected(format!("{status}: {text}")));
        }
        let reply: ChatReply = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Transport(format!("malformed completion body: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Transport("completion has no content".to_string()))
    }
}
