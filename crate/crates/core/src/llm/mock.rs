//! In-process providers for tests and demos.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::{LlmProvider, LlmRequest, ProviderError};

type ReplyFn = dyn Fn(&LlmRequest, u32) -> Result<String, ProviderError> + Send + Sync;

/// Answers every request with a closure.
pub struct FnProvider {
    name: String,
    reply: Box<ReplyFn>,
}

impl FnProvider {
    pub fn new(
        name: impl Into<String>,
        reply: impl Fn(&LlmRequest, u32) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        FnProvider {
            name: name.into(),
            reply: Box::new(reply),
        }
    }
}

#[async_trait::async_trait]
impl LlmProvider for FnProvider {
    fn model_id(&self) -> String {
        self.name.clone()
    }

    async fn send(&self, request: &LlmRequest, attempt: u32) -> Result<String, ProviderError> {
        (self.reply)(request, attempt)
    }
}

/// Replays a queue of replies per tag; tags without a queue are missing fixtures.
#[derive(Default)]
pub struct ScriptedProvider {
    queues: Mutex<HashMap<String, VecDeque<Result<String, ProviderError>>>>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, tag: &str, reply: Result<String, ProviderError>) -> &Self {
        self.queues
            .lock()
            .unwrap()
            .entry(tag.to_string())
            .or_default()
            .push_back(reply);
        self
    }
}

#[async_trait::async_trait]
impl LlmProvider for ScriptedProvider {
    fn model_id(&self) -> String {
        "scripted".to_string()
    }

    async fn send(&self, request: &LlmRequest, _attempt: u32) -> Result<String, ProviderError> {
        let mut queues = self.queues.lock().unwrap();
        match queues.get_mut(&request.tag).and_then(VecDeque::pop_front) {
            Some(reply) => reply,
            None => Err(ProviderError::MissingFixture(request.tag.clone())),
        }
    }
}

/// Adds a fixed delay before delegating.
pub struct LatencyProvider<P> {
    inner: P,
    delay: Duration,
}

impl<P> LatencyProvider<P> {
    pub fn new(inner: P, delay: Duration) -> Self {
        LatencyProvider { inner, delay }
    }
}

#[async_trait::async_trait]
impl<P: LlmProvider> LlmProvider for LatencyProvider<P> {
    fn model_id(&self) -> String {
        self.inner.model_id()
    }

    async fn send(&self, request: &LlmRequest, attempt: u32) -> Result<String, ProviderError> {
        tokio::time::sleep(self.delay).await;
        self.inner.send(request, attempt).await
    }
}

/// Shared counters read by tests.
#[derive(Debug, Default)]
pub struct CallStats {
    pub calls: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
}

impl CallStats {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

/// Counts calls and the peak number of concurrent calls.
pub struct InstrumentedProvider<P> {
    inner: P,
    stats: Arc<CallStats>,
}

impl<P> InstrumentedProvider<P> {
    pub fn new(inner: P) -> Self {
        InstrumentedProvider {
            inner,
            stats: Arc::new(CallStats::default()),
        }
    }

    pub fn stats(&self) -> Arc<CallStats> {
        self.stats.clone()
    }
}

struct InFlightGuard<'a>(&'a CallStats);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait::async_trait]
impl<P: LlmProvider> LlmProvider for InstrumentedProvider<P> {
    fn model_id(&self) -> String {
        self.inner.model_id()
    }

    async fn send(&self, request: &LlmRequest, attempt: u32) -> Result<String, ProviderError> {
        self.stats.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
        let _guard = InFlightGuard(&self.stats);
        self.inner.send(request, attempt).await
    }
}
