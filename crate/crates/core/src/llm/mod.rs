//! Provider-agnostic LLM access.
//!
//! Every request carries a stable `tag` (used as the fixture key), the name
//! of the response schema it expects, and the model role that should serve
//! it. The [`Gateway`] validates replies against the schema, re-prompts on
//! violations, retries transport failures with backoff and bounds the number
//! of requests in flight.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod fixture;
pub mod gateway;
pub mod live;
pub mod mock;
pub mod schema;

pub use fixture::FixtureProvider;
pub use gateway::{Gateway, GatewayConfig};
pub use live::ChatCompletionsProvider;
pub use schema::{ResponseSchema, SchemaTag};

/// Which configured model serves a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRole {
    /// Extraction, summaries and all on-the-fly features.
    Extraction,
    /// Duplicate grouping in the correction loops.
    Dedup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: MessageRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    /// Stable identifier such as `scene_split/ch3`; unique within a run.
    pub tag: String,
    pub messages: Vec<Message>,
    pub schema: SchemaTag,
    pub temperature: f64,
    pub model_role: ModelRole,
}

impl LlmRequest {
    pub fn new(tag: impl Into<String>, schema: SchemaTag, model_role: ModelRole) -> Self {
        LlmRequest {
            tag: tag.into(),
            messages: Vec::new(),
            schema,
            temperature: 0.0,
            model_role,
        }
    }

    pub fn system(mut self, content: impl Into<String>) -> Self {
        self.messages.push(Message {
            role: MessageRole::System,
            content: content.into(),
        });
        self
    }

    pub fn user(mut self, content: impl Into<String>) -> Self {
        self.messages.push(Message {
            role: MessageRole::User,
            content: content.into(),
        });
        self
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t.max(0.0);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub raw_text: String,
    /// Conforms to the request's schema.
    pub parsed: serde_json::Value,
    pub attempts: u32,
}

impl LlmResponse {
    pub fn parse_as<T: ResponseSchema>(&self) -> Result<T, LlmError> {
        serde_json::from_value(self.parsed.clone()).map_err(|e| LlmError::SchemaViolation {
            tag: String::new(),
            message: e.to_string(),
            raw_text: self.raw_text.clone(),
            attempts: self.attempts,
        })
    }
}

/// Failure reported by a provider for a single call.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    /// Network or server trouble; worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no fixture for tag {0:?}")]
    MissingFixture(String),
    /// The provider refused the request outright; retrying will not help.
    #[error("request rejected: {0}")]
    Rejected(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("{tag}: response violated schema after {attempts} attempts: {message}")]
    SchemaViolation {
        tag: String,
        message: String,
        raw_text: String,
        attempts: u32,
    },
    #[error("{tag}: transport failed after {attempts} attempts: {message}")]
    Transport {
        tag: String,
        message: String,
        attempts: u32,
    },
    #[error("{tag}: authentication failed: {message}")]
    Auth { tag: String, message: String },
    #[error("no fixture for tag {tag:?}")]
    MissingFixture { tag: String },
    #[error("{tag}: request rejected: {message}")]
    Rejected { tag: String, message: String },
}

impl LlmError {
    pub fn tag(&self) -> &str {
        match self {
            LlmError::SchemaViolation { tag, .. }
            | LlmError::Transport { tag, .. }
            | LlmError::Auth { tag, .. }
            | LlmError::MissingFixture { tag }
            | LlmError::Rejected { tag, .. } => tag,
        }
    }
}

/// A backend that turns a request into raw reply text.
///
/// `attempt` starts at 1 and increases on schema re-prompts and transport
/// retries; fixture playback uses it to script multi-attempt exchanges.
#[async_trait::async_trait]
pub trait LlmProvider: Send + Sync {
    fn model_id(&self) -> String;

    async fn send(&self, request: &LlmRequest, attempt: u32) -> Result<String, ProviderError>;
}
