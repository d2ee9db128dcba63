//! Per-scene ratings and entity extraction.

use crate::llm::schema::{EntityReply, SceneDetail};
use crate::llm::{Gateway, LlmError, LlmRequest, ModelRole, SchemaTag};
use crate::model::{clamp_rating, EntityKind, ProvenanceLog, Ratings};

use super::prompts;
use super::segment::{RawAppearance, SceneDraft};

pub fn detail_request(
    chapter_index: usize,
    scene_index: usize,
    kind: EntityKind,
    draft: &SceneDraft,
    chapter_text: &str,
) -> LlmRequest {
    LlmRequest::new(
        format!("scene_detail/ch{chapter_index}/s{scene_index}/{}", kind.plural()),
        SchemaTag::SceneDetail,
        ModelRole::Extraction,
    )
    .system(prompts::scene_detail_system(kind))
    .user(prompts::scene_detail_user(draft, chapter_text))
}

fn to_appearance(e: EntityReply, kind: EntityKind, step: &str, log: &mut ProvenanceLog) -> RawAppearance {
    let name = e.name.trim().to_string();
    let (importance, moved_i) = clamp_rating(e.importance.unwrap_or(0.5), 0.0, 1.0);
    let (sentiment, moved_s) = clamp_rating(e.sentiment, -1.0, 1.0);
    if moved_i || moved_s {
        log.repair(step, format!("{name}: entity rating clamped"));
    }
    let emotion = e
        .emotion
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "n/a".to_string());
    RawAppearance {
        raw_name: name,
        kind,
        importance,
        sentiment,
        emotion,
        quote_candidate: e.quote,
        evidence: None,
    }
}

/// Folds one detail reply into `draft`. Ratings are taken from the first
/// reply applied; repeated names within the scene keep their first mention.
pub fn apply_detail(
    draft: &mut SceneDraft,
    kind: EntityKind,
    reply: SceneDetail,
    first: bool,
    step: &str,
    log: &mut ProvenanceLog,
) {
    if first {
        let (ratings, notes) = Ratings::clamped(reply.importance, reply.conflict, reply.sentiment);
        for n in notes {
            log.repair(step, n);
        }
        draft.ratings = ratings;
        draft.importance_explanation = reply.importance_explanation.trim().to_string();
    }
    for e in reply.entities {
        let name = e.name.trim();
        if name.is_empty() {
            continue;
        }
        if draft
            .raw_appearances
            .iter()
            .any(|a| a.kind == kind && a.raw_name == name)
        {
            log.repair(step, format!("{name} listed twice; kept first"));
            continue;
        }
        let app = to_appearance(e, kind, step, log);
        draft.raw_appearances.push(app);
    }
}

/// Runs the detail calls for one scene, one per requested entity kind.
pub async fn detail_scene(
    gateway: &Gateway,
    chapter_index: usize,
    scene_index: usize,
    kinds: &[EntityKind],
    draft: &mut SceneDraft,
    chapter_text: &str,
    log: &mut ProvenanceLog,
) -> Result<(), LlmError> {
    let step = format!("detail/ch{chapter_index}/s{scene_index}");
    for (i, &kind) in kinds.iter().enumerate() {
        let request = detail_request(chapter_index, scene_index, kind, draft, chapter_text);
        let (reply, _) = gateway.complete_as::<SceneDetail>(request).await?;
        apply_detail(draft, kind, reply, i == 0, &step, log);
    }
    Ok(())
}
