//! Classifying why scenes begin where they do.
//!
//! A keyword heuristic runs first. Explanations it cannot place can be sent
//! to the model in batches; without a model they count as [`BoundaryClass::Other`].

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::schema::BoundaryLabels;
use crate::llm::{Gateway, LlmRequest, ModelRole, SchemaTag};
use crate::model::{ProvenanceLog, StoryData};
use crate::pipeline::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryClass {
    TimeChange,
    LocationChange,
    CharacterChange,
    FocusShift,
    CharacterAction,
    Other,
}

impl BoundaryClass {
    pub const LABELED: [BoundaryClass; 5] = [
        BoundaryClass::TimeChange,
        BoundaryClass::LocationChange,
        BoundaryClass::CharacterChange,
        BoundaryClass::FocusShift,
        BoundaryClass::CharacterAction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryClass::TimeChange => "time_change",
            BoundaryClass::LocationChange => "location_change",
            BoundaryClass::CharacterChange => "character_change",
            BoundaryClass::FocusShift => "focus_shift",
            BoundaryClass::CharacterAction => "character_action",
            BoundaryClass::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Self::LABELED.into_iter().chain([BoundaryClass::Other]).find(|c| c.as_str() == s)
    }
}

#[derive(Deserialize)]
struct KeywordFile {
    priority: Vec<String>,
    classes: BTreeMap<String, KeywordClass>,
}

#[derive(Deserialize)]
struct KeywordClass {
    weight: u32,
    phrases: Vec<String>,
}

struct Rules {
    /// In priority order.
    classes: Vec<(BoundaryClass, u32, Vec<Regex>)>,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| {
        let file: KeywordFile =
            toml::from_str(include_str!("boundary_keywords.toml")).expect("bundled keyword file parses");
        let classes = file
            .priority
            .iter()
            .map(|name| {
                let class = BoundaryClass::parse(name).expect("known class in priority list");
                let entry = &file.classes[name];
                let patterns = entry
                    .phrases
                    .iter()
                    .map(|p| Regex::new(&format!(r"(?i)\b{}\b", regex::escape(p))).expect("escaped phrase"))
                    .collect();
                (class, entry.weight, patterns)
            })
            .collect();
        Rules { classes }
    })
}

/// Weighted keyword score for every labeled class, in priority order.
pub fn keyword_scores(explanation: &str) -> Vec<(BoundaryClass, u32)> {
    rules()
        .classes
        .iter()
        .map(|(class, weight, patterns)| {
            let hits = patterns.iter().filter(|p| p.is_match(explanation)).count() as u32;
            (*class, hits * weight)
        })
        .collect()
}

/// Heuristic label, or `None` when no keyword matches.
///
/// ```
/// use ribbons_core::analytics::boundaries::{classify_heuristic, BoundaryClass};
/// assert_eq!(
///     classify_heuristic("K. returns to the office the next day"),
///     Some(BoundaryClass::TimeChange)
/// );
/// ```
pub fn classify_heuristic(explanation: &str) -> Option<BoundaryClass> {
    let mut best: Option<(BoundaryClass, u32)> = None;
    for (class, score) in keyword_scores(explanation) {
        // strict comparison keeps the earlier (higher priority) class on ties
        if score > 0 && best.is_none_or(|(_, s)| score > s) {
            best = Some((class, score));
        }
    }
    best.map(|(c, _)| c)
}

/// Share of each class; sums to 1 when `labels` is non-empty.
pub fn distribution(labels: &[BoundaryClass]) -> BTreeMap<BoundaryClass, f64> {
    let mut counts: BTreeMap<BoundaryClass, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_insert(0) += 1;
    }
    let total = labels.len() as f64;
    counts.into_iter().map(|(c, n)| (c, n as f64 / total)).collect()
}

/// Boundary explanations of every scene after the first in its chapter.
pub fn boundary_explanations(story: &StoryData) -> Vec<String> {
    story
        .scenes
        .iter()
        .filter(|s| s.scene_index > 0)
        .map(|s| s.boundary_explanation.clone())
        .collect()
}

/// Labels every explanation. Heuristic misses go to the model in batches
/// of `batch` when a gateway is given, and become `Other` otherwise or on
/// failure.
pub async fn classify_boundaries(
    explanations: &[String],
    gateway: Option<&Gateway>,
    batch: usize,
) -> (Vec<BoundaryClass>, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    let mut labels: Vec<Option<BoundaryClass>> = explanations.iter().map(|e| classify_heuristic(e)).collect();
    let unresolved: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_none()).collect();
    if let (Some(gateway), false) = (gateway, unresolved.is_empty()) {
        let chunks: Vec<&[usize]> = unresolved.chunks(batch.max(1)).collect();
        let requests = chunks
            .iter()
            .enumerate()
            .map(|(i, chunk)| {
                let items: Vec<String> = chunk.iter().map(|&j| explanations[j].clone()).collect();
                LlmRequest::new(format!("boundary_classify/{i}"), SchemaTag::BoundaryLabels, ModelRole::Extraction)
                    .system(prompts::boundary_classify_system())
                    .user(prompts::numbered_list(&items))
            })
            .collect();
        let results = gateway.map_concurrent(requests, gateway.config().max_concurrency).await;
        for (i, (chunk, result)) in chunks.iter().zip(results).enumerate() {
            match result.and_then(|r| r.parse_as::<BoundaryLabels>()) {
                Ok(reply) => {
                    if reply.labels.len() != chunk.len() {
                        log.repair(
                            "boundary_classify",
                            format!("batch {i}: {} labels for {} items", reply.labels.len(), chunk.len()),
                        );
                    }
                    for (&j, label) in chunk.iter().zip(&reply.labels) {
                        labels[j] = BoundaryClass::parse(label);
                    }
                }
                Err(e) => log.flag("boundary_classify", format!("batch {i} failed: {e}")),
            }
        }
    }
    let labels = labels.into_iter().map(|l| l.unwrap_or(BoundaryClass::Other)).collect();
    (labels, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sentences() {
        assert_eq!(
            classify_heuristic("The conversation shifts to their future political strategies"),
            Some(BoundaryClass::FocusShift)
        );
        assert_eq!(
            classify_heuristic("K. returns to the office the next day"),
            Some(BoundaryClass::TimeChange)
        );
        assert_eq!(
            classify_heuristic("Emma formulates a plan for Harriet's future."),
            Some(BoundaryClass::CharacterAction)
        );
    }

    #[test]
    fn word_boundaries_and_case() {
        assert_eq!(classify_heuristic("NEXT DAY at the inn"), Some(BoundaryClass::TimeChange));
        // "plantation" must not hit "plan"
        assert_eq!(classify_heuristic("plantation"), None);
    }

    #[test]
    fn priority_breaks_ties() {
        // one location hit (2) vs one character hit (2)
        let scores = keyword_scores("She arrives. A new setting");
        assert!(scores.contains(&(BoundaryClass::LocationChange, 2)));
        assert_eq!(classify_heuristic("the setting; a visitor"), Some(BoundaryClass::LocationChange));
    }

    #[test]
    fn offline_misses_are_other() {
        let items = vec!["Gregor is a bug".to_string(), "the next day".to_string()];
        let labels = futures::executor::block_on(classify_boundaries(&items, None, 10)).0;
        assert_eq!(labels, vec![BoundaryClass::Other, BoundaryClass::TimeChange]);
        let d = distribution(&labels);
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
