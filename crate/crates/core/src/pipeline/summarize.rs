//! Chapter summaries and pairwise character interactions.
//!
//! Counts are computed from scene data; only the prose and the chapter
//! ratings come from the model.

use std::collections::{BTreeMap, BTreeSet};

use crate::llm::schema::{ChapterSummaryReply, InteractionReply};
use crate::llm::{Gateway, LlmRequest, ModelRole, SchemaTag};
use crate::model::{quantize, Chapter, ChapterSummary, EntityKind, Interaction, ProvenanceLog, Ratings, Scene};

use super::prompts;

/// Scenes per character and per location in one chapter's scenes.
pub fn chapter_counts(scenes: &[&Scene]) -> (BTreeMap<String, usize>, BTreeMap<String, usize>) {
    let mut characters = BTreeMap::new();
    let mut locations = BTreeMap::new();
    for s in scenes {
        let present: BTreeSet<&str> = s
            .appearances
            .iter()
            .filter(|a| a.kind == EntityKind::Character)
            .map(|a| a.entity_id.as_str())
            .collect();
        for id in present {
            *characters.entry(id.to_string()).or_insert(0) += 1;
        }
        *locations.entry(s.location_id.clone()).or_insert(0) += 1;
    }
    (characters, locations)
}

/// Character pairs `(a, b)` with `a < b` sharing at least one scene.
pub fn co_occurring_pairs(scenes: &[&Scene]) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for s in scenes {
        let ids: BTreeSet<&str> = s
            .appearances
            .iter()
            .filter(|a| a.kind == EntityKind::Character)
            .map(|a| a.entity_id.as_str())
            .collect();
        let ids: Vec<&str> = ids.into_iter().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                pairs.insert((a.to_string(), b.to_string()));
            }
        }
    }
    pairs
}

/// `lines / longest`, quantized; 0 for an empty story.
pub fn length_norms(chapters: &[Chapter]) -> Vec<f64> {
    let longest = chapters.iter().map(Chapter::line_count).max().unwrap_or(0);
    chapters
        .iter()
        .map(|c| {
            if longest == 0 {
                0.0
            } else {
                quantize(c.line_count() as f64 / longest as f64)
            }
        })
        .collect()
}

enum Job {
    Summary(usize),
    Interaction(usize, String, String),
}

/// Builds every chapter summary. All model calls (one summary per chapter,
/// one per co-occurring pair) go out as a single concurrent batch.
pub async fn summarize_chapters(
    gateway: &Gateway,
    chapters: &[Chapter],
    scenes: &[Scene],
    character_names: &BTreeMap<String, String>,
    limit: usize,
) -> (Vec<ChapterSummary>, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    let norms = length_norms(chapters);
    let mut summaries = Vec::with_capacity(chapters.len());
    let mut jobs = Vec::new();
    let mut requests = Vec::new();

    for (pos, ch) in chapters.iter().enumerate() {
        let in_chapter: Vec<&Scene> = scenes.iter().filter(|s| s.chapter_index == ch.index).collect();
        let (character_counts, location_counts) = chapter_counts(&in_chapter);
        summaries.push(ChapterSummary {
            chapter_index: ch.index,
            summary: String::new(),
            ratings: Ratings::default(),
            length_norm: norms[pos],
            character_counts,
            location_counts,
            interactions: Vec::new(),
        });

        let scene_lines: Vec<String> = in_chapter
            .iter()
            .map(|s| format!("{}: {}", s.title, s.summary))
            .collect();
        jobs.push(Job::Summary(pos));
        requests.push(
            LlmRequest::new(
                format!("chapter_summary/ch{}", ch.index),
                SchemaTag::ChapterSummary,
                ModelRole::Extraction,
            )
            .system(prompts::chapter_summary_system())
            .user(prompts::chapter_summary_user(&ch.title, &scene_lines)),
        );

        for (a, b) in co_occurring_pairs(&in_chapter) {
            let shared: Vec<String> = in_chapter
                .iter()
                .filter(|s| s.has_entity(EntityKind::Character, &a) && s.has_entity(EntityKind::Character, &b))
                .map(|s| format!("{}: {}", s.title, s.summary))
                .collect();
            let name = |id: &str| character_names.get(id).cloned().unwrap_or_else(|| id.to_string());
            requests.push(
                LlmRequest::new(
                    format!("interaction/ch{}/{a}+{b}", ch.index),
                    SchemaTag::Interaction,
                    ModelRole::Extraction,
                )
                .system(prompts::interaction_system())
                .user(prompts::interaction_user(&name(&a), &name(&b), &shared)),
            );
            jobs.push(Job::Interaction(pos, a, b));
        }
    }

    let results = gateway.map_concurrent(requests, limit).await;
    for (job, result) in jobs.into_iter().zip(results) {
        match job {
            Job::Summary(pos) => {
                let cs = &mut summaries[pos];
                let step = format!("chapter_summary/ch{}", cs.chapter_index);
                match result.and_then(|r| r.parse_as::<ChapterSummaryReply>()) {
                    Ok(reply) => {
                        let (ratings, notes) = Ratings::clamped(reply.importance, reply.conflict, reply.sentiment);
                        for n in notes {
                            log.repair(&step, n);
                        }
                        cs.summary = reply.summary.trim().to_string();
                        cs.ratings = ratings;
                    }
                    Err(e) => {
                        log.flag(&step, format!("summary unavailable: {e}"));
                        cs.ratings = Ratings {
                            importance: 0.5,
                            conflict: 0.5,
                            sentiment: 0.0,
                        };
                    }
                }
            }
            Job::Interaction(pos, a, b) => {
                let cs = &mut summaries[pos];
                let summary = match result.and_then(|r| r.parse_as::<InteractionReply>()) {
                    Ok(reply) => reply.summary.trim().to_string(),
                    Err(e) => {
                        log.flag(
                            format!("interaction/ch{}", cs.chapter_index),
                            format!("{a}+{b}: summary unavailable: {e}"),
                        );
                        String::new()
                    }
                };
                cs.interactions.push(Interaction { a, b, summary });
            }
        }
    }
    (summaries, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_relative_to_longest() {
        let ch = |index, line_start, line_end| Chapter {
            index,
            title: String::new(),
            line_start,
            line_end,
        };
        assert_eq!(length_norms(&[ch(0, 0, 30), ch(1, 30, 90), ch(2, 90, 110)]), vec![0.5, 1.0, 0.3333]);
        assert!(length_norms(&[]).is_empty());
    }
}
