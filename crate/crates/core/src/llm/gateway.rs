use std::sync::Arc;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use tokio::sync::Semaphore;

use super::schema::{extract_json, ResponseSchema};
use super::{
    LlmError, LlmProvider, LlmRequest, LlmResponse, Message, MessageRole, ModelRole,
    ProviderError,
};
use crate::model::ModelIds;

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Upper bound on provider calls in flight across all callers.
    pub max_concurrency: usize,
    /// Total attempts allowed for a reply to satisfy its schema.
    pub schema_attempts: u32,
    /// Retries after a transport failure.
    pub transport_retries: u32,
    /// First backoff delay; doubles on each transport retry.
    pub backoff_base: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            max_concurrency: 8,
            schema_attempts: 3,
            transport_retries: 5,
            backoff_base: Duration::from_millis(500),
        }
    }
}

/// Routes requests to the provider for their model role.
///
/// Cloning is cheap; clones share the in-flight limit.
#[derive(Clone)]
pub struct Gateway {
    extraction: Arc<dyn LlmProvider>,
    dedup: Arc<dyn LlmProvider>,
    permits: Arc<Semaphore>,
    config: GatewayConfig,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("extraction", &self.extraction.model_id())
            .field("dedup", &self.dedup.model_id())
            .field("config", &self.config)
            .finish()
    }
}

impl Gateway {
    pub fn new(
        extraction: Arc<dyn LlmProvider>,
        dedup: Arc<dyn LlmProvider>,
        config: GatewayConfig,
    ) -> Self {
        let permits = Arc::new(Semaphore::new(config.max_concurrency.max(1)));
        Gateway {
            extraction,
            dedup,
            permits,
            config,
        }
    }

    /// One provider serving both model roles.
    pub fn single(provider: Arc<dyn LlmProvider>, config: GatewayConfig) -> Self {
        Gateway::new(provider.clone(), provider, config)
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn model_ids(&self) -> ModelIds {
        ModelIds {
            extraction: self.extraction.model_id(),
            dedup: self.dedup.model_id(),
        }
    }

    fn provider(&self, role: ModelRole) -> &Arc<dyn LlmProvider> {
        match role {
            ModelRole::Extraction => &self.extraction,
            ModelRole::Dedup => &self.dedup,
        }
    }

    async fn send_once(&self, request: &LlmRequest, attempt: u32) -> Result<String, ProviderError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .expect("gateway semaphore is never closed");
        self.provider(request.model_role).send(request, attempt).await
    }

    /// Sends a request and returns a schema-conforming reply.
    ///
    /// Transport failures are retried with exponential backoff. A reply that
    /// fails validation is answered with a re-prompt carrying the validation
    /// error, up to `schema_attempts` total attempts.
    pub async fn complete(&self, request: LlmRequest) -> Result<LlmResponse, LlmError> {
        let tag = request.tag.clone();
        let mut conversation = request;
        let mut attempt = 0u32;
        let mut schema_failures = 0u32;
        let mut transport_failures = 0u32;
        loop {
            attempt += 1;
            let raw = match self.send_once(&conversation, attempt).await {
                Ok(raw) => raw,
                Err(ProviderError::Transport(message)) => {
                    transport_failures += 1;
                    if transport_failures > self.config.transport_retries {
                        return Err(LlmError::Transport {
                            tag,
                            message,
                            attempts: attempt,
                        });
                    }
                    let delay = self.config.backoff_base * 2u32.saturating_pow(transport_failures - 1);
                    tracing::warn!(%tag, attempt, ?delay, "transport failure: {message}");
                    tokio::time::sleep(delay).await;
                    continue;
                }
                Err(ProviderError::Auth(message)) => return Err(LlmError::Auth { tag, message }),
                Err(ProviderError::MissingFixture(_)) => return Err(LlmError::MissingFixture { tag }),
                Err(ProviderError::Rejected(message)) => {
                    return Err(LlmError::Rejected { tag, message })
                }
            };

            let checked = extract_json(&raw).and_then(|value| {
                conversation.schema.validate(&value)?;
                Ok(value)
            });
            match checked {
                Ok(parsed) => {
                    return Ok(LlmResponse {
                        raw_text: raw,
                        parsed,
                        attempts: attempt,
                    })
                }
                Err(message) => {
                    schema_failures += 1;
                    if schema_failures >= self.config.schema_attempts {
                        return Err(LlmError::SchemaViolation {
                            tag,
                            message,
                            raw_text: raw,
                            attempts: attempt,
                        });
                    }
                    tracing::warn!(%tag, attempt, "reply failed validation: {message}");
                    conversation.messages.push(Message {
                        role: MessageRole::Assistant,
                        content: raw,
                    });
                    conversation.messages.push(Message {
                        role: MessageRole::User,
                        content: format!(
                            "Your previous reply was rejected: {message}. Reply again with only a JSON object of the form {}",
                            conversation.schema.shape_hint()
                        ),
                    });
                }
            }
        }
    }

    /// [`complete`](Self::complete) followed by typed decoding.
    pub async fn complete_as<T: ResponseSchema>(
        &self,
        request: LlmRequest,
    ) -> Result<(T, LlmResponse), LlmError> {
        debug_assert_eq!(request.schema, T::TAG);
        let tag = request.tag.clone();
        let response = self.complete(request).await?;
        let typed = response.parse_as::<T>().map_err(|e| match e {
            LlmError::SchemaViolation {
                message,
                raw_text,
                attempts,
                ..
            } => LlmError::SchemaViolation {
                tag,
                message,
                raw_text,
                attempts,
            },
            other => other,
        })?;
        Ok((typed, response))
    }

    /// Runs requests with at most `limit` in flight; results keep input order
    /// and one failure does not affect its siblings. A `limit` of 0 is treated as 1.
    pub async fn map_concurrent(
        &self,
        requests: Vec<LlmRequest>,
        limit: usize,
    ) -> Vec<Result<LlmResponse, LlmError>> {
        stream::iter(requests)
            .map(|r| self.complete(r))
            .buffered(limit.max(1))
            .collect()
            .await
    }
}
