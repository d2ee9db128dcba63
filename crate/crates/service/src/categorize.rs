//! `POST /stories/{id}/categorize-by-color`: a discrete color palette over
//! the cast (or the themes) for a user-chosen attribute.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::Json;
use ribbons_core::llm::schema::{ColorCategoriesReply, ResponseSchema};
use ribbons_core::llm::{LlmRequest, ModelRole, SchemaTag};
use ribbons_core::model::{EntityKind, StoryData};
use ribbons_core::pipeline::color::{make_distinct, normalize_hex, palette_color};
use ribbons_core::text::{normalize_key, short_slug};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{parse_body, parse_kind, resolve_entity, ApiError, AppState};

pub const MAX_CATEGORIES: usize = 8;
pub const OTHER: &str = "other";
const OTHER_COLOR: &str = "#9E9E9E";

#[derive(Debug, Deserialize)]
struct CategorizeBody {
    attribute: String,
    #[serde(default)]
    scope: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub label: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub label: String,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorCategorization {
    pub attribute: String,
    pub scope: String,
    pub categories: Vec<Category>,
    pub assignments: BTreeMap<String, Assignment>,
    pub repairs: Vec<String>,
}

/// Enforces the palette invariants on a model reply.
///
/// `entities` lists every entity id that must receive exactly one label;
/// `resolve` maps a model reference to an entity id. At most
/// [`MAX_CATEGORIES`] categories survive: when more are proposed the first
/// seven are kept and the rest fold into `other`, which also collects every
/// unlabeled entity. Category colors end up pairwise distinct.
pub fn enforce(
    entities: &[String],
    reply: ColorCategoriesReply,
    resolve: impl Fn(&str) -> Option<String>,
) -> (Vec<Category>, BTreeMap<String, Assignment>, Vec<String>) {
    let mut repairs = Vec::new();
    let is_other = |l: &str| normalize_key(l) == OTHER;

    // distinct labels, first spelling wins
    let mut labels: Vec<(String, Option<String>)> = Vec::new();
    let mut other_color = None;
    for c in &reply.categories {
        let label = c.label.trim();
        if label.is_empty() {
            repairs.push("dropped a category with an empty label".to_string());
        } else if is_other(label) {
            other_color = other_color.or_else(|| normalize_hex(&c.color));
        } else if labels.iter().any(|(l, _)| normalize_key(l) == normalize_key(label)) {
            repairs.push(format!("merged duplicate category {label:?}"));
        } else {
            labels.push((label.to_string(), normalize_hex(&c.color)));
        }
    }

    let lookup = |labels: &[(String, Option<String>)], l: &str| {
        labels.iter().find(|(k, _)| normalize_key(k) == normalize_key(l)).map(|(k, _)| k.clone())
    };
    let mut proposed: BTreeMap<String, (String, String)> = BTreeMap::new();
    for a in reply.assignments {
        match resolve(&a.entity) {
            Some(id) if entities.contains(&id) => match proposed.entry(id) {
                Entry::Occupied(e) => repairs.push(format!("{}: second label {:?} ignored", e.key(), a.label)),
                Entry::Vacant(e) => {
                    e.insert((a.label, a.explanation.trim().to_string()));
                }
            },
            _ => repairs.push(format!("dropped assignment for unknown entity {:?}", a.entity)),
        }
    }

    let needs_other = |labels: &[(String, Option<String>)]| {
        entities.iter().any(|id| {
            proposed
                .get(id)
                .is_none_or(|(l, _)| lookup(labels, l).is_none())
        })
    };
    if labels.len() > MAX_CATEGORIES || (labels.len() == MAX_CATEGORIES && needs_other(&labels)) {
        for (l, _) in labels.drain(MAX_CATEGORIES - 1..) {
            repairs.push(format!("category {l:?} merged into {OTHER:?} (limit {MAX_CATEGORIES})"));
        }
    }

    let mut assignments = BTreeMap::new();
    for id in entities {
        let assignment = match proposed.get(id) {
            Some((label, explanation)) => match lookup(&labels, label) {
                Some(kept) => Assignment {
                    label: kept,
                    explanation: explanation.clone(),
                },
                None => {
                    if !is_other(label) {
                        repairs.push(format!("{id}: label {label:?} is not a kept category; assigned {OTHER:?}"));
                    }
                    Assignment {
                        label: OTHER.to_string(),
                        explanation: explanation.clone(),
                    }
                }
            },
            None => {
                repairs.push(format!("{id}: not labeled by model; assigned {OTHER:?}"));
                Assignment {
                    label: OTHER.to_string(),
                    explanation: "(not labeled by model)".to_string(),
                }
            }
        };
        assignments.insert(id.clone(), assignment);
    }

    let mut categories: Vec<Category> = labels
        .into_iter()
        .enumerate()
        .map(|(i, (label, color))| Category {
            color: color.unwrap_or_else(|| palette_color(i)),
            label,
        })
        .collect();
    if assignments.values().any(|a| a.label == OTHER) {
        categories.push(Category {
            label: OTHER.to_string(),
            color: other_color.unwrap_or_else(|| OTHER_COLOR.to_string()),
        });
    }
    let mut colors: Vec<String> = categories.iter().map(|c| c.color.clone()).collect();
    for (i, old, new) in make_distinct(&mut colors) {
        repairs.push(format!("category {:?}: color {old} taken; moved to {new}", categories[i].label));
    }
    for (c, color) in categories.iter_mut().zip(colors) {
        c.color = color;
    }
    (categories, assignments, repairs)
}

fn entity_listing(story: &StoryData, kind: EntityKind) -> (Vec<String>, String) {
    match kind {
        EntityKind::Character => (
            story.characters.iter().map(|c| c.entity_id.clone()).collect(),
            story
                .characters
                .iter()
                .map(|c| format!("- {} (id: {}; also called {})\n", c.canonical_name, c.entity_id, c.aliases.join(", ")))
                .collect(),
        ),
        EntityKind::Theme => (
            story.themes.iter().map(|t| t.entity_id.clone()).collect(),
            story
                .themes
                .iter()
                .map(|t| format!("- {} (id: {})\n", t.name, t.entity_id))
                .collect(),
        ),
    }
}

async fn compute(state: &AppState, id: &str, story: &StoryData, kind: EntityKind, attribute: &str) -> Result<Value, ApiError> {
    let (entities, listing) = entity_listing(story, kind);
    let request = LlmRequest::new(
        format!("categorize/{}/{}", kind.plural(), short_slug(attribute, 60)),
        SchemaTag::ColorCategories,
        ModelRole::Extraction,
    )
    .system(format!(
        "Group the listed {} of \"{}\" into at most {MAX_CATEGORIES} discrete categories of the \
         attribute \"{attribute}\". Give each category a label and a distinct #RRGGBB color, then \
         assign every entity to one category with a one-sentence explanation. Use the ids given.\n\n\
         Reply with a single JSON object of the form:\n{}",
        kind.plural(),
        story.meta.title,
        SchemaTag::ColorCategories.shape_hint()
    ))
    .user(listing);
    let (reply, _) = state
        .gateway(id)
        .complete_as::<ColorCategoriesReply>(request)
        .await?;
    debug_assert!(reply.check().is_ok());
    let (categories, assignments, repairs) = enforce(&entities, reply, |r| resolve_entity(story, kind, r));
    let result = ColorCategorization {
        attribute: attribute.to_string(),
        scope: kind.plural().to_string(),
        categories,
        assignments,
        repairs,
    };
    serde_json::to_value(result).map_err(|e| ApiError::internal(e.to_string()))
}

pub async fn handler(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let story = state.load(&id)?;
    let req: CategorizeBody = parse_body(&body)?;
    let attribute = req.attribute.trim().to_string();
    if attribute.is_empty() {
        return Err(ApiError::bad_request("attribute must not be empty"));
    }
    let kind = parse_kind(req.scope.as_deref())?;
    let key = json!({
        "story": story.hash,
        "attribute": normalize_key(&attribute),
        "scope": kind.plural(),
    });
    let value = state
        .cache
        .get_or_compute(&state.cache_dir(&id), "categorize", key, || {
            compute(&state, &id, &story.data, kind, &attribute)
        })
        .await?;
    Ok(Json(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ribbons_core::llm::schema::{AssignmentReply, CategoryReply};

    fn reply(labels: &[&str], assigned: &[(&str, &str)]) -> ColorCategoriesReply {
        ColorCategoriesReply {
            categories: labels
                .iter()
                .map(|l| CategoryReply {
                    label: l.to_string(),
                    color: "#FF0000".to_string(),
                })
                .collect(),
            assignments: assigned
                .iter()
                .map(|(e, l)| AssignmentReply {
                    entity: e.to_string(),
                    label: l.to_string(),
                    explanation: String::new(),
                })
                .collect(),
        }
    }

    fn ents(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("e{i}")).collect()
    }

    fn identity(r: &str) -> Option<String> {
        Some(r.to_string())
    }

    #[test]
    fn twelve_categories_become_seven_plus_other() {
        let labels: Vec<String> = (0..12).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let entities = ents(12);
        let assigned: Vec<(&str, &str)> = entities.iter().map(String::as_str).zip(refs.iter().copied()).collect();
        let (cats, assignments, _) = enforce(&entities, reply(&refs, &assigned), identity);
        assert_eq!(cats.len(), 8);
        assert_eq!(cats.last().unwrap().label, OTHER);
        assert_eq!(assignments["e11"].label, OTHER);
        assert_eq!(assignments["e3"].label, "c3");
    }

    #[test]
    fn half_labeled_cast_fills_other() {
        let entities = ents(4);
        let (cats, assignments, repairs) =
            enforce(&entities, reply(&["rich", "poor"], &[("e0", "rich"), ("e1", "poor")]), identity);
        assert_eq!(assignments.len(), 4);
        assert_eq!(assignments["e2"].label, OTHER);
        assert_eq!(cats.len(), 3);
        assert!(repairs.iter().any(|r| r.contains("e3")));
    }

    #[test]
    fn colors_are_distinct() {
        let entities = ents(3);
        let (cats, _, _) = enforce(
            &entities,
            reply(&["a", "b", "c"], &[("e0", "a"), ("e1", "b"), ("e2", "c")]),
            identity,
        );
        let set: std::collections::BTreeSet<_> = cats.iter().map(|c| &c.color).collect();
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn eight_labels_with_leftovers_still_fit() {
        let labels: Vec<String> = (0..8).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let entities = ents(9);
        let assigned: Vec<(&str, &str)> = entities[..8].iter().map(String::as_str).zip(refs.iter().copied()).collect();
        let (cats, assignments, _) = enforce(&entities, reply(&refs, &assigned), identity);
        assert_eq!(cats.len(), 8);
        assert_eq!(assignments["e8"].label, OTHER);
        assert_eq!(assignments["e7"].label, OTHER);
    }
}
