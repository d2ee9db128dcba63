//! HTTP service over a data directory of processed stories.
//!
//! Read endpoints serve the stored artifacts byte-for-byte with strong
//! ETags. The three query endpoints (`ask`, `rank-by-trait`,
//! `categorize-by-color`) call the model, repair its output so the response
//! invariants always hold, and cache results on disk.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ribbons_core::llm::Gateway;
use ribbons_core::model::{self, EntityKind, StoryData, StoryMeta};
use ribbons_core::store::StoryStore;
use serde::de::DeserializeOwned;
use tower_http::cors::{Any, CorsLayer};

pub mod ask;
pub mod cache;
pub mod categorize;
pub mod error;
pub mod rank;

pub use cache::Cache;
pub use error::ApiError;

/// Picks the gateway that answers queries about a story.
pub type GatewaySource = Arc<dyn Fn(&str) -> Gateway + Send + Sync>;

pub struct AppState {
    pub store: StoryStore,
    pub gateways: GatewaySource,
    pub cache: Cache,
}

/// A loaded story plus the hash of its file, which keys the cache.
pub struct LoadedStory {
    pub data: StoryData,
    pub hash: String,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

impl AppState {
    pub fn new(store: StoryStore, gateways: GatewaySource, no_cache: bool) -> Self {
        AppState {
            store,
            gateways,
            cache: Cache::new(no_cache),
        }
    }

    fn story_bytes(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        if !valid_id(id) || !self.store.story_path(id).is_file() {
            return Err(ApiError::not_found(format!("unknown story {id:?}")));
        }
        Ok(self.store.read_story_bytes(id)?)
    }

    pub fn load(&self, id: &str) -> Result<LoadedStory, ApiError> {
        let bytes = self.story_bytes(id)?;
        let data = model::deserialize(&bytes)
            .map_err(|e| ApiError::internal(format!("story {id} is unreadable: {e}")))?;
        Ok(LoadedStory {
            data,
            hash: cache::sha256_hex(&bytes),
        })
    }

    pub fn gateway(&self, id: &str) -> Gateway {
        (self.gateways)(id)
    }

    pub fn cache_dir(&self, id: &str) -> std::path::PathBuf {
        self.store.cache_dir(id)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods(Any)
        .allow_headers(Any)
        .expose_headers([header::ETAG]);
    Router::new()
        .route("/stories", get(list_stories))
        .route("/stories/{id}", get(get_story))
        .route("/stories/{id}/chapters/{n}/text", get(chapter_text))
        .route("/stories/{id}/ask", post(ask::handler))
        .route("/stories/{id}/rank-by-trait", post(rank::handler))
        .route("/stories/{id}/categorize-by-color", post(categorize::handler))
        .layer(cors)
        .with_state(state)
}

/// Serves on `addr` until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

/// Parses a JSON body, mapping every failure to a 400 in the error format.
pub(crate) fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

pub(crate) fn parse_kind(scope: Option<&str>) -> Result<EntityKind, ApiError> {
    match scope.unwrap_or("characters") {
        "characters" => Ok(EntityKind::Character),
        "themes" => Ok(EntityKind::Theme),
        other => Err(ApiError::invalid_scope(format!(
            "scope must be \"characters\" or \"themes\", got {other:?}"
        ))),
    }
}

/// Finds the entity a model refers to by id, name or alias (case and
/// spacing insensitive).
pub(crate) fn resolve_entity(story: &StoryData, kind: EntityKind, reference: &str) -> Option<String> {
    let key = ribbons_core::text::normalize_key(reference);
    let same = |n: &String| ribbons_core::text::normalize_key(n) == key;
    let id = reference.trim();
    match kind {
        EntityKind::Character => story
            .characters
            .iter()
            .find(|c| c.entity_id == id || same(&c.canonical_name) || c.aliases.iter().any(same))
            .map(|c| c.entity_id.clone()),
        EntityKind::Theme => story
            .themes
            .iter()
            .find(|t| t.entity_id == id || same(&t.name) || t.aliases.iter().any(same))
            .map(|t| t.entity_id.clone()),
    }
}

fn etag_response(bytes: Vec<u8>, content_type: &'static str, headers: &HeaderMap) -> Response {
    let etag = format!("\"{}\"", cache::sha256_hex(&bytes));
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    let etag = HeaderValue::from_str(&etag).expect("hex etag is a valid header");
    if matches {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static(content_type)),
            (header::ETAG, etag),
        ],
        bytes,
    )
        .into_response()
}

async fn list_stories(State(state): State<Arc<AppState>>) -> Result<Json<Vec<StoryMeta>>, ApiError> {
    let mut out = Vec::new();
    for id in state.store.list_story_ids()? {
        out.push(state.load(&id)?.data.meta);
    }
    Ok(Json(out))
}

async fn get_story(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let bytes = state.story_bytes(&id)?;
    Ok(etag_response(bytes, "application/json", &headers))
}

async fn chapter_text(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    state.story_bytes(&id)?;
    let not_found = || ApiError::not_found(format!("story {id:?} has no chapter {n:?}"));
    let index: usize = n.parse().map_err(|_| not_found())?;
    let path = state.store.chapter_text_path(&id, index);
    let bytes = std::fs::read(&path).map_err(|_| not_found())?;
    Ok(etag_response(bytes, "text/plain; charset=utf-8", &headers))
}
