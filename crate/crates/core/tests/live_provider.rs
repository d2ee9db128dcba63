//! The chat-completions provider against a local mock server.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use ribbons_core::llm::schema::AskTextReply;
use ribbons_core::llm::{
    ChatCompletionsProvider, Gateway, GatewayConfig, LlmError, LlmRequest, ModelRole, SchemaTag,
};
use serde_json::{json, Value};

#[derive(Clone)]
struct Mock {
    failures_left: Arc<AtomicU32>,
    status: StatusCode,
}

async fn completions(State(mock): State<Mock>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    if headers.get("authorization").and_then(|v| v.to_str().ok()) != Some("Bearer secret") {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": "bad key"})));
    }
    if mock.failures_left.load(Ordering::SeqCst) > 0 {
        mock.failures_left.fetch_sub(1, Ordering::SeqCst);
        return (mock.status, Json(json!({"error": "try later"})));
    }
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["response_format"]["type"], "json_object");
    let question = body["messages"].as_array().unwrap().last().unwrap()["content"].clone();
    let content = json!({"answer": format!("echo {}", question.as_str().unwrap())}).to_string();
    (
        StatusCode::OK,
        Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})),
    )
}

async fn serve(failures: u32, status: StatusCode) -> String {
    let mock = Mock {
        failures_left: Arc::new(AtomicU32::new(failures)),
        status,
    };
    let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(mock);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1")
}

fn gateway(base: &str, key: &str) -> Gateway {
    let provider = ChatCompletionsProvider::new(base, key, "test-model");
    Gateway::single(
        Arc::new(provider),
        GatewayConfig {
            backoff_base: Duration::from_millis(1),
            ..GatewayConfig::default()
        },
    )
}

fn ask() -> LlmRequest {
    LlmRequest::new("ask/t", SchemaTag::AskText, ModelRole::Extraction).user("hello")
}

#[tokio::test]
async fn round_trip() {
    let base = serve(0, StatusCode::OK).await;
    let (reply, _) = gateway(&base, "secret").complete_as::<AskTextReply>(ask()).await.unwrap();
    assert_eq!(reply.answer, "echo hello");
}

#[tokio::test]
async fn server_errors_are_retried() {
    let base = serve(2, StatusCode::SERVICE_UNAVAILABLE).await;
    let (reply, resp) = gateway(&base, "secret").complete_as::<AskTextReply>(ask()).await.unwrap();
    assert_eq!(reply.answer, "echo hello");
    assert_eq!(resp.attempts, 3);
}

#[tokio::test]
async fn bad_key_is_an_auth_error() {
    let base = serve(0, StatusCode::OK).await;
    let err = gateway(&base, "wrong").complete(ask()).await.unwrap_err();
    assert!(matches!(err, LlmError::Auth { .. }), "{err:?}");
}

#[tokio::test]
async fn client_errors_are_rejected_without_retry() {
    let base = serve(1, StatusCode::BAD_REQUEST).await;
    let err = gateway(&base, "secret").complete(ask()).await.unwrap_err();
    assert!(matches!(err, LlmError::Rejected { .. }), "{err:?}");
}
