use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use ribbons_core::llm::mock::{FnProvider, InstrumentedProvider, LatencyProvider};
use ribbons_core::llm::schema::AskTextReply;
use ribbons_core::llm::{
    Gateway, GatewayConfig, LlmError, LlmRequest, MessageRole, ModelRole, ProviderError, SchemaTag,
};

fn fast_config() -> GatewayConfig {
    GatewayConfig {
        backoff_base: Duration::from_millis(1),
        ..GatewayConfig::default()
    }
}

fn ask(tag: &str) -> LlmRequest {
    LlmRequest::new(tag, SchemaTag::AskText, ModelRole::Extraction).user("question")
}

#[tokio::test]
async fn transport_failures_are_retried() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let provider = FnProvider::new("flaky", move |_, _| {
        if c.fetch_add(1, Ordering::SeqCst) < 2 {
            Err(ProviderError::Transport("connection reset".into()))
        } else {
            Ok(r#"{"answer": "yes"}"#.into())
        }
    });
    let gw = Gateway::single(Arc::new(provider), fast_config());
    let (reply, resp) = gw.complete_as::<AskTextReply>(ask("t")).await.unwrap();
    assert_eq!(reply.answer, "yes");
    assert_eq!(resp.attempts, 3);
}

#[tokio::test]
async fn transport_gives_up_after_retry_budget() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let provider = FnProvider::new("down", move |_, _| {
        c.fetch_add(1, Ordering::SeqCst);
        Err(ProviderError::Transport("503".into()))
    });
    let gw = Gateway::single(Arc::new(provider), fast_config());
    let err = gw.complete(ask("t")).await.unwrap_err();
    assert!(matches!(err, LlmError::Transport { .. }));
    // first try plus five retries
    assert_eq!(calls.load(Ordering::SeqCst), 6);
}

#[tokio::test]
async fn schema_violation_is_reprompted_with_the_error() {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let s = seen.clone();
    let provider = FnProvider::new("sloppy", move |req, attempt| {
        s.lock().unwrap().push(req.messages.clone());
        if attempt == 1 {
            Ok(r#"{"reply": "wrong key"}"#.into())
        } else {
            Ok("Here you go: {\"answer\": \"fixed\"}".into())
        }
    });
    let gw = Gateway::single(Arc::new(provider), fast_config());
    let (reply, resp) = gw.complete_as::<AskTextReply>(ask("t")).await.unwrap();
    assert_eq!(reply.answer, "fixed");
    assert_eq!(resp.attempts, 2);
    let second = &seen.lock().unwrap()[1];
    let last = second.last().unwrap();
    assert_eq!(last.role, MessageRole::User);
    assert!(last.content.contains("answer"), "{}", last.content);
    assert_eq!(second[second.len() - 2].role, MessageRole::Assistant);
}

#[tokio::test]
async fn schema_violation_surfaces_after_three_attempts() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let provider = FnProvider::new("broken", move |_, _| {
        c.fetch_add(1, Ordering::SeqCst);
        Ok("not json at all".into())
    });
    let gw = Gateway::single(Arc::new(provider), fast_config());
    match gw.complete(ask("t")).await.unwrap_err() {
        LlmError::SchemaViolation { raw_text, attempts, .. } => {
            assert_eq!(raw_text, "not json at all");
            assert_eq!(attempts, 3);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn auth_errors_are_not_retried() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let provider = FnProvider::new("locked", move |_, _| {
        c.fetch_add(1, Ordering::SeqCst);
        Err(ProviderError::Auth("bad key".into()))
    });
    let gw = Gateway::single(Arc::new(provider), fast_config());
    assert!(matches!(gw.complete(ask("t")).await, Err(LlmError::Auth { .. })));
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn dedup_role_goes_to_dedup_provider() {
    let ex = FnProvider::new("ex-model", |_, _| Ok(r#"{"answer": "extraction"}"#.into()));
    let dd = FnProvider::new("dd-model", |_, _| Ok(r#"{"answer": "dedup"}"#.into()));
    let gw = Gateway::new(Arc::new(ex), Arc::new(dd), fast_config());
    let req = LlmRequest::new("t", SchemaTag::AskText, ModelRole::Dedup).user("q");
    let (reply, _) = gw.complete_as::<AskTextReply>(req).await.unwrap();
    assert_eq!(reply.answer, "dedup");
    assert_eq!(gw.model_ids().extraction, "ex-model");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn fan_out_respects_limit_and_beats_serial() {
    let inner = FnProvider::new("slow", |_, _| Ok(r#"{"answer": "ok"}"#.into()));
    let provider = InstrumentedProvider::new(LatencyProvider::new(inner, Duration::from_millis(200)));
    let stats = provider.stats();
    let gw = Gateway::single(Arc::new(provider), fast_config());
    let requests: Vec<_> = (0..12).map(|i| ask(&format!("ch{i}"))).collect();
    let start = Instant::now();
    let results = gw.map_concurrent(requests, 8).await;
    let elapsed = start.elapsed();
    assert!(results.iter().all(Result::is_ok));
    assert_eq!(stats.calls(), 12);
    assert!(stats.max_in_flight() <= 8);
    let serial = Duration::from_millis(200 * 12);
    assert!(elapsed < serial.mul_f64(0.35), "{elapsed:?}");
}
