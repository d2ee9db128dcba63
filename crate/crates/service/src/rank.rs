//! `POST /stories/{id}/rank-by-trait`: per-scene rankings of characters or
//! themes by a user-chosen trait.
//!
//! Each ranked list is repaired into an exact permutation of the scene's
//! appearances of that kind.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::Json;
use ribbons_core::llm::schema::TraitRankReply;
use ribbons_core::llm::{LlmRequest, ModelRole, SchemaTag};
use ribbons_core::model::{EntityKind, Scene, StoryData};
use ribbons_core::text::{normalize_key, short_slug};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{parse_body, parse_kind, resolve_entity, ApiError, AppState};

/// Justification given to entities the model left out.
pub const NOT_RANKED: &str = "(not ranked by model)";

#[derive(Debug, Deserialize)]
struct RankBody {
    #[serde(rename = "trait")]
    trait_name: String,
    #[serde(default)]
    scope: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub entity_id: String,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneRanking {
    pub chapter_index: usize,
    pub scene_index: usize,
    pub ranked: Vec<RankedEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRepair {
    pub chapter_index: usize,
    pub scene_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitRanking {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub scope: String,
    pub per_scene: Vec<SceneRanking>,
    pub repairs: Vec<RankRepair>,
}

/// Turns a proposed ranking into a permutation of `expected`.
///
/// `proposed` holds the resolved entity id (if the reference matched any
/// entity) with the model's reference text and justification. Unknown,
/// out-of-scene and repeated entries are dropped; entities never ranked are
/// appended in `expected` order.
pub fn repair_ranking(
    expected: &[String],
    proposed: Vec<(Option<String>, String, String)>,
) -> (Vec<RankedEntry>, Vec<String>) {
    let mut notes = Vec::new();
    let mut seen = BTreeSet::new();
    let mut ranked = Vec::new();
    for (id, reference, justification) in proposed {
        match id {
            Some(id) if expected.contains(&id) => {
                if seen.insert(id.clone()) {
                    ranked.push(RankedEntry {
                        entity_id: id,
                        justification: justification.trim().to_string(),
                    });
                } else {
                    notes.push(format!("dropped repeated entry {reference:?}"));
                }
            }
            Some(id) => notes.push(format!("dropped {id:?}, which does not appear in this scene")),
            None => notes.push(format!("dropped unknown entity {reference:?}")),
        }
    }
    for id in expected {
        if !seen.contains(id) {
            notes.push(format!("appended {id:?}, missing from the model's ranking"));
            ranked.push(RankedEntry {
                entity_id: id.clone(),
                justification: NOT_RANKED.to_string(),
            });
        }
    }
    (ranked, notes)
}

/// The scene's entities of `kind`, ordered by first appearance in the story.
fn scene_entities(scene: &Scene, kind: EntityKind, story_order: &[String]) -> Vec<String> {
    story_order
        .iter()
        .filter(|id| scene.has_entity(kind, id))
        .cloned()
        .collect()
}

fn rank_request(story: &StoryData, kind: EntityKind, trait_name: &str, scene: &Scene, entities: &[String]) -> LlmRequest {
    let listing: String = entities
        .iter()
        .map(|id| {
            let name = story.entity_name(kind, id).unwrap_or(id);
            let emotion = scene
                .appearances
                .iter()
                .find(|a| a.kind == kind && &a.entity_id == id)
                .map(|a| a.emotion.as_str())
                .unwrap_or("");
            format!("- {name} (id: {id}; emotion: {emotion})\n")
        })
        .collect();
    LlmRequest::new(
        format!(
            "rank/{}/{}/ch{}/s{}",
            kind.plural(),
            short_slug(trait_name, 60),
            scene.chapter_index,
            scene.scene_index
        ),
        SchemaTag::TraitRank,
        ModelRole::Extraction,
    )
    .system(format!(
        "Rank every listed {} in this scene by how strongly they show the trait \"{trait_name}\", \
         strongest first, with a one-sentence justification each. Use the ids given.\n\n\
         Reply with a single JSON object of the form:\n{}",
        kind.as_str(),
        SchemaTag::TraitRank.shape_hint()
    ))
    .user(format!("Scene: {}\n{}\n\n{listing}", scene.title, scene.summary))
}

async fn compute(state: &AppState, id: &str, story: &StoryData, kind: EntityKind, trait_name: &str) -> Result<Value, ApiError> {
    let order = story.entities_by_first_appearance(kind);
    let mut jobs = Vec::new();
    let mut requests = Vec::new();
    for (i, scene) in story.scenes.iter().enumerate() {
        let entities = scene_entities(scene, kind, &order);
        if !entities.is_empty() {
            requests.push(rank_request(story, kind, trait_name, scene, &entities));
            jobs.push((i, entities));
        }
    }
    let gateway = state.gateway(id);
    let results = gateway.map_concurrent(requests, gateway.config().max_concurrency).await;

    let mut per_scene: Vec<SceneRanking> = story
        .scenes
        .iter()
        .map(|s| SceneRanking {
            chapter_index: s.chapter_index,
            scene_index: s.scene_index,
            ranked: Vec::new(),
        })
        .collect();
    let mut repairs = Vec::new();
    for ((i, expected), result) in jobs.into_iter().zip(results) {
        let reply: TraitRankReply = result?.parse_as()?;
        let proposed = reply
            .ranked
            .into_iter()
            .map(|r| (resolve_entity(story, kind, &r.entity), r.entity, r.justification))
            .collect();
        let (ranked, notes) = repair_ranking(&expected, proposed);
        let entry = &mut per_scene[i];
        for message in notes {
            repairs.push(RankRepair {
                chapter_index: entry.chapter_index,
                scene_index: entry.scene_index,
                message,
            });
        }
        entry.ranked = ranked;
    }
    let ranking = TraitRanking {
        trait_name: trait_name.to_string(),
        scope: kind.plural().to_string(),
        per_scene,
        repairs,
    };
    serde_json::to_value(ranking).map_err(|e| ApiError::internal(e.to_string()))
}

pub async fn handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let story = state.load(&id)?;
    let req: RankBody = parse_body(&body)?;
    let trait_name = req.trait_name.trim().to_string();
    if trait_name.is_empty() {
        return Err(ApiError::bad_request("trait must not be empty"));
    }
    let kind = parse_kind(req.scope.as_deref())?;
    let key = json!({
        "story": story.hash,
        "trait": normalize_key(&trait_name),
        "scope": kind.plural(),
    });
    let value = state
        .cache
        .get_or_compute(&state.cache_dir(&id), "rank", key, || {
            compute(&state, &id, &story.data, kind, &trait_name)
        })
        .await?;
    Ok(Json(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn p(id: Option<&str>, r: &str) -> (Option<String>, String, String) {
        (id.map(str::to_string), r.to_string(), "because".to_string())
    }

    #[test]
    fn missing_entity_is_appended() {
        let (ranked, notes) = repair_ranking(&ids(&["a", "b", "c"]), vec![p(Some("b"), "B"), p(Some("a"), "A")]);
        let order: Vec<_> = ranked.iter().map(|r| r.entity_id.as_str()).collect();
        assert_eq!(order, ["b", "a", "c"]);
        assert_eq!(ranked[2].justification, NOT_RANKED);
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn hallucinated_and_repeated_entries_dropped() {
        let (ranked, notes) = repair_ranking(
            &ids(&["a", "b"]),
            vec![p(None, "Ghost"), p(Some("z"), "Zed"), p(Some("a"), "A"), p(Some("a"), "a again"), p(Some("b"), "B")],
        );
        let order: Vec<_> = ranked.iter().map(|r| r.entity_id.as_str()).collect();
        assert_eq!(order, ["a", "b"]);
        assert_eq!(notes.len(), 3);
    }

    #[test]
    fn empty_scene_stays_empty() {
        let (ranked, notes) = repair_ranking(&[], vec![p(Some("a"), "A")]);
        assert!(ranked.is_empty());
        assert_eq!(notes.len(), 1);
    }
}
