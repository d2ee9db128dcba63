//! `POST /stories/{id}/ask`: free-form questions.
//!
//! Story scope returns the most relevant chapter; chapter and scene scope
//! answer from the raw text of that span.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::Json;
use ribbons_core::llm::schema::{AskStoryReply, AskTextReply};
use ribbons_core::llm::{LlmRequest, Message, MessageRole, ModelRole, SchemaTag};
use ribbons_core::model::StoryData;
use ribbons_core::text::{normalize_key, short_slug};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{parse_body, ApiError, AppState};

#[derive(Debug, Deserialize)]
struct AskBody {
    question: String,
    #[serde(default)]
    scope: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AskScope {
    Story,
    Chapter(usize),
    Scene(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskResult {
    pub question: String,
    pub chapter_index: usize,
    pub explanation: String,
}

fn index_field(obj: &serde_json::Map<String, Value>, name: &str) -> Result<Option<usize>, ApiError> {
    match obj.get(name) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| ApiError::invalid_scope(format!("{name} must be a non-negative integer"))),
    }
}

/// Accepts `"story"` (or nothing), `{"chapter": c}` or `{"chapter": c, "scene": s}`.
pub fn parse_scope(scope: &Value, story: &StoryData) -> Result<AskScope, ApiError> {
    let parsed = match scope {
        Value::Null => AskScope::Story,
        Value::String(s) if s == "story" => AskScope::Story,
        Value::Object(obj) => {
            if let Some(k) = obj.keys().find(|k| *k != "chapter" && *k != "scene") {
                return Err(ApiError::invalid_scope(format!("unexpected scope field {k:?}")));
            }
            match (index_field(obj, "chapter")?, index_field(obj, "scene")?) {
                (Some(c), None) => AskScope::Chapter(c),
                (Some(c), Some(s)) => AskScope::Scene(c, s),
                _ => return Err(ApiError::invalid_scope("scope object needs a chapter")),
            }
        }
        other => return Err(ApiError::invalid_scope(format!("unsupported scope {other}"))),
    };
    match parsed {
        AskScope::Chapter(c) if c >= story.chapters.len() => {
            Err(ApiError::invalid_scope(format!("chapter {c} out of range (story has {})", story.chapters.len())))
        }
        AskScope::Scene(c, s) if story.scene(c, s).is_none() => {
            Err(ApiError::invalid_scope(format!("scene {c}.{s} does not exist")))
        }
        ok => Ok(ok),
    }
}

fn scope_json(scope: AskScope) -> Value {
    match scope {
        AskScope::Story => json!("story"),
        AskScope::Chapter(c) => json!({"chapter": c}),
        AskScope::Scene(c, s) => json!({"chapter": c, "scene": s}),
    }
}

fn question_slug(q: &str) -> String {
    let slug = short_slug(q, 80);
    if slug.is_empty() {
        "question".to_string()
    } else {
        slug
    }
}

fn story_request(story: &StoryData, question: &str) -> LlmRequest {
    let chapters: String = story
        .chapter_summaries
        .iter()
        .map(|cs| {
            let title = &story.chapters[cs.chapter_index].title;
            format!("Chapter {}: {title}\n{}\n\n", cs.chapter_index, cs.summary)
        })
        .collect();
    LlmRequest::new(
        format!("ask/story/{}", question_slug(question)),
        SchemaTag::AskStory,
        ModelRole::Extraction,
    )
    .system(format!(
        "You answer questions about a story by pointing to the single most relevant chapter. \
         Chapters are numbered from 0. Explain briefly why that chapter answers the question.\n\n\
         Reply with a single JSON object of the form:\n{}",
        SchemaTag::AskStory.shape_hint()
    ))
    .user(format!("{chapters}Question: {question}"))
}

fn text_request(tag: String, question: &str, text: &str) -> LlmRequest {
    LlmRequest::new(tag, SchemaTag::AskText, ModelRole::Extraction)
        .system(format!(
            "Answer the question using only the passage given. Be concise.\n\n\
             Reply with a single JSON object of the form:\n{}",
            SchemaTag::AskText.shape_hint()
        ))
        .user(format!("Passage:\n{text}\n\nQuestion: {question}"))
}

async fn ask_story(state: &AppState, id: &str, story: &StoryData, question: &str) -> Result<Value, ApiError> {
    let gateway = state.gateway(id);
    let n = story.chapters.len();
    let request = story_request(story, question);
    let tag = request.tag.clone();
    let (reply, raw) = gateway.complete_as::<AskStoryReply>(request.clone()).await?;
    let reply = if (0..n as i64).contains(&reply.chapter_index) {
        reply
    } else {
        tracing::warn!(%tag, index = reply.chapter_index, "chapter index out of range; re-prompting");
        let mut retry = request;
        retry.tag = format!("{tag}/retry");
        retry.messages.push(Message {
            role: MessageRole::Assistant,
            content: raw.raw_text,
        });
        retry.messages.push(Message {
            role: MessageRole::User,
            content: format!(
                "chapter_index {} does not exist. Choose a chapter between 0 and {}.",
                reply.chapter_index,
                n.saturating_sub(1)
            ),
        });
        let (again, _) = gateway.complete_as::<AskStoryReply>(retry).await?;
        if !(0..n as i64).contains(&again.chapter_index) {
            return Err(ApiError::new(
                axum::http::StatusCode::BAD_GATEWAY,
                "invalid_model_answer",
                format!("model chose chapter {} of {n} twice", again.chapter_index),
            ));
        }
        again
    };
    let result = AskResult {
        question: question.to_string(),
        chapter_index: reply.chapter_index as usize,
        explanation: reply.explanation.trim().to_string(),
    };
    serde_json::to_value(result).map_err(|e| ApiError::internal(e.to_string()))
}

async fn ask_text(state: &AppState, id: &str, story: &StoryData, scope: AskScope, question: &str) -> Result<Value, ApiError> {
    let slug = question_slug(question);
    let (tag, text) = match scope {
        AskScope::Chapter(c) => (format!("ask/ch{c}/{slug}"), state.store.read_chapter_text(id, c)?),
        AskScope::Scene(c, s) => {
            let chapter = state.store.read_chapter_text(id, c)?;
            let scene = story.scene(c, s).expect("scope was validated");
            let text = chapter
                .lines()
                .skip(scene.line_start)
                .take(scene.line_count())
                .collect::<Vec<_>>()
                .join("\n");
            (format!("ask/ch{c}/s{s}/{slug}"), text)
        }
        AskScope::Story => unreachable!("story scope handled separately"),
    };
    let (reply, _) = state
        .gateway(id)
        .complete_as::<AskTextReply>(text_request(tag, question, &text))
        .await?;
    Ok(json!({"answer": reply.answer.trim()}))
}

pub async fn handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let story = state.load(&id)?;
    let req: AskBody = parse_body(&body)?;
    let question = req.question.trim().to_string();
    if question.is_empty() {
        return Err(ApiError::bad_request("question must not be empty"));
    }
    let scope = parse_scope(&req.scope, &story.data)?;
    let key = json!({
        "story": story.hash,
        "question": normalize_key(&question),
        "scope": scope_json(scope),
    });
    let value = state
        .cache
        .get_or_compute(&state.cache_dir(&id), "ask", key, || async {
            match scope {
                AskScope::Story => ask_story(&state, &id, &story.data, &question).await,
                _ => ask_text(&state, &id, &story.data, scope, &question).await,
            }
        })
        .await?;
    Ok(Json(value))
}
