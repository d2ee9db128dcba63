//! Story-level entity descriptions: character profiles, location quotes
//! and theme colors.

use futures::stream::{self, StreamExt};

use crate::llm::schema::{CharacterProfile, LocationProfile, ThemeColors};
use crate::llm::{Gateway, LlmRequest, ModelRole, SchemaTag};
use crate::model::{Evidence, ProvenanceLog};

use super::color::{normalize_hex, palette_color};
use super::prompts;
use super::quotes::verify_single;

/// What the model is told about one entity.
#[derive(Debug, Clone)]
pub struct EntityContext {
    pub id: String,
    pub name: String,
    pub aliases: Vec<String>,
    /// Scene titles and summaries where the entity appears.
    pub context: String,
}

#[derive(Debug, Clone)]
pub struct CharacterDraft {
    pub group_label: String,
    pub color: String,
    pub color_explanation: String,
    pub quote: Evidence,
}

/// Label used when no group could be obtained for a character.
pub const FALLBACK_GROUP: &str = "Other characters";

fn explain_request(kind: &str, e: &EntityContext) -> LlmRequest {
    LlmRequest::new(
        format!("quote_explain/{kind}/{}", e.id),
        SchemaTag::Explanation,
        ModelRole::Extraction,
    )
    .system(prompts::quote_explanation_system())
    .user(prompts::entity_explanation_user(kind, &e.name, &e.context))
}

async fn one_character(
    gateway: &Gateway,
    index: usize,
    e: &EntityContext,
    texts: &[&str],
) -> (CharacterDraft, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    let step = format!("character_profile/{}", e.id);
    let request = LlmRequest::new(step.clone(), SchemaTag::CharacterProfile, ModelRole::Extraction)
        .system(prompts::character_profile_system())
        .user(prompts::profile_user(&e.name, &e.aliases, &e.context));
    let profile = match gateway.complete_as::<CharacterProfile>(request).await {
        Ok((p, _)) => Some(p),
        Err(err) => {
            log.flag(&step, format!("profile unavailable: {err}"));
            None
        }
    };
    let candidate = profile.as_ref().and_then(|p| p.quote.clone());
    let fallback_text = format!("No verified quote is available for {}.", e.name);
    let quote = verify_single(
        gateway,
        texts,
        candidate.as_deref(),
        explain_request("character", e),
        &fallback_text,
        &mut log,
    )
    .await;
    let draft = match profile {
        Some(p) => {
            let color = normalize_hex(&p.color).unwrap_or_else(|| {
                log.repair(&step, format!("invalid color {:?} replaced", p.color));
                palette_color(index)
            });
            CharacterDraft {
                group_label: p.group.trim().to_string(),
                color,
                color_explanation: p.color_explanation.trim().to_string(),
                quote,
            }
        }
        None => CharacterDraft {
            group_label: FALLBACK_GROUP.to_string(),
            color: palette_color(index),
            color_explanation: String::new(),
            quote,
        },
    };
    (draft, log)
}

pub async fn character_profiles(
    gateway: &Gateway,
    entities: &[EntityContext],
    texts: &[&str],
    limit: usize,
) -> (Vec<CharacterDraft>, ProvenanceLog) {
    let results: Vec<_> = stream::iter(entities.iter().enumerate())
        .map(|(i, e)| one_character(gateway, i, e, texts))
        .buffered(limit.max(1))
        .collect()
        .await;
    let mut log = ProvenanceLog::default();
    let drafts = results
        .into_iter()
        .map(|(d, l)| {
            log.absorb(l);
            d
        })
        .collect();
    (drafts, log)
}

async fn one_location(gateway: &Gateway, e: &EntityContext, texts: &[&str]) -> (Evidence, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    let step = format!("location_profile/{}", e.id);
    let request = LlmRequest::new(step.clone(), SchemaTag::LocationProfile, ModelRole::Extraction)
        .system(prompts::location_profile_system())
        .user(prompts::profile_user(&e.name, &e.aliases, &e.context));
    let candidate = match gateway.complete_as::<LocationProfile>(request).await {
        Ok((p, _)) => p.quote,
        Err(err) => {
            log.flag(&step, format!("profile unavailable: {err}"));
            None
        }
    };
    let fallback_text = format!("No verified quote is available for {}.", e.name);
    let quote = verify_single(
        gateway,
        texts,
        candidate.as_deref(),
        explain_request("location", e),
        &fallback_text,
        &mut log,
    )
    .await;
    (quote, log)
}

pub async fn location_quotes(
    gateway: &Gateway,
    entities: &[EntityContext],
    texts: &[&str],
    limit: usize,
) -> (Vec<Evidence>, ProvenanceLog) {
    let results: Vec<_> = stream::iter(entities)
        .map(|e| one_location(gateway, e, texts))
        .buffered(limit.max(1))
        .collect()
        .await;
    let mut log = ProvenanceLog::default();
    let quotes = results
        .into_iter()
        .map(|(q, l)| {
            log.absorb(l);
            q
        })
        .collect();
    (quotes, log)
}

/// One call for all theme colors. Themes the reply misses, or gives an
/// invalid color, get a palette color.
pub async fn theme_colors(gateway: &Gateway, names: &[String]) -> (Vec<String>, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    if names.is_empty() {
        return (Vec::new(), log);
    }
    let request = LlmRequest::new("theme_colors", SchemaTag::ThemeColors, ModelRole::Extraction)
        .system(prompts::theme_colors_system())
        .user(prompts::theme_colors_user(names));
    let proposed = match gateway.complete_as::<ThemeColors>(request).await {
        Ok((reply, _)) => reply.themes,
        Err(e) => {
            log.flag("theme_colors", format!("theme colors unavailable: {e}"));
            Vec::new()
        }
    };
    let colors = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let found = proposed
                .iter()
                .find(|t| t.name.trim().eq_ignore_ascii_case(name))
                .and_then(|t| normalize_hex(&t.color));
            found.unwrap_or_else(|| {
                log.repair("theme_colors", format!("{name}: no valid color; palette color used"));
                palette_color(i)
            })
        })
        .collect();
    (colors, log)
}
