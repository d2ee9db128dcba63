//! Invariant checks over a complete [`StoryData`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{EntityKind, Evidence, EvidenceVariant, Scene, StoryData};

/// One broken invariant: which type, which record, what is wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub type_name: &'static str,
    pub id: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.type_name, self.id, self.message)
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, type_name: &'static str, id: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            type_name,
            id: id.into(),
            message: message.into(),
        });
    }
}

fn is_slug(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

pub(crate) fn is_hex_color(s: &str) -> bool {
    s.len() == 7 && s.starts_with('#') && s[1..].bytes().all(|b| b.is_ascii_hexdigit())
}

/// Checks every invariant of the story data model against the raw chapter
/// texts (`chapter_texts[i]` is the text of chapter `i`).
///
/// Returns an empty list iff the story is well formed.
pub fn validate(story: &StoryData, chapter_texts: &[String]) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    check_meta(story, &mut r);
    check_chapters(story, chapter_texts, &mut r);
    check_scenes(story, chapter_texts, &mut r);
    check_entities(story, chapter_texts, &mut r);
    check_summaries(story, &mut r);
    let log = &story.pipeline_log;
    if log.quotes_replaced > log.quotes_checked {
        r.push(
            "ProvenanceLog",
            "pipeline_log",
            format!(
                "quotes_replaced {} exceeds quotes_checked {}",
                log.quotes_replaced, log.quotes_checked
            ),
        );
    }
    r.0
}

fn check_meta(story: &StoryData, r: &mut Report) {
    if story.schema_version != super::SCHEMA_VERSION {
        r.push("StoryData", &story.meta.id, "unsupported schema_version");
    }
    if !is_slug(&story.meta.id) {
        r.push("StoryMeta", &story.meta.id, "id must match [a-z0-9-]+");
    }
}

fn check_chapters(story: &StoryData, texts: &[String], r: &mut Report) {
    let total = story.meta.line_count;
    let mut prev_end: Option<usize> = None;
    for (pos, ch) in story.chapters.iter().enumerate() {
        let id = format!("chapter {}", ch.index);
        if ch.index != pos {
            r.push("Chapter", &id, format!("index {} at position {pos}", ch.index));
        }
        if ch.line_start >= ch.line_end || ch.line_end > total {
            r.push(
                "Chapter",
                &id,
                format!(
                    "range [{}, {}) outside story of {total} lines or empty",
                    ch.line_start, ch.line_end
                ),
            );
        }
        if let Some(end) = prev_end {
            if ch.line_start != end {
                r.push("Chapter", &id, format!("starts at {} but previous ends at {end}", ch.line_start));
            }
        }
        prev_end = Some(ch.line_end);
        match texts.get(pos) {
            None => r.push("Chapter", &id, "chapter text missing"),
            Some(text) => {
                let n = text.lines().count();
                if n != ch.line_count() {
                    r.push(
                        "Chapter",
                        &id,
                        format!("text has {n} lines, range has {}", ch.line_count()),
                    );
                }
            }
        }
    }
    if story.chapters.is_empty() {
        r.push("StoryData", &story.meta.id, "no chapters");
    }
}

fn check_evidence(
    ev: &Evidence,
    texts: &[&str],
    owner_type: &'static str,
    owner: &str,
    r: &mut Report,
) {
    match ev.variant {
        EvidenceVariant::Quote => {
            if !ev.verified {
                r.push(owner_type, owner, "quote evidence not marked verified");
            }
            if ev.text.trim().is_empty() || !texts.iter().any(|t| t.contains(ev.text.as_str())) {
                r.push(
                    owner_type,
                    owner,
                    format!("unverified quote {:?} not found in chapter text", ev.text),
                );
            }
        }
        EvidenceVariant::Explanation => {
            if ev.verified {
                r.push(owner_type, owner, "explanation evidence marked verified");
            }
        }
    }
}

fn check_scenes(story: &StoryData, texts: &[String], r: &mut Report) {
    let characters: BTreeSet<&str> = story.characters.iter().map(|c| c.entity_id.as_str()).collect();
    let themes: BTreeSet<&str> = story.themes.iter().map(|t| t.entity_id.as_str()).collect();
    let locations: BTreeSet<&str> = story.locations.iter().map(|l| l.entity_id.as_str()).collect();

    let mut by_chapter: BTreeMap<usize, Vec<&Scene>> = BTreeMap::new();
    let mut last_key = None;
    for s in &story.scenes {
        let key = (s.chapter_index, s.scene_index);
        if last_key.is_some_and(|k| k >= key) {
            r.push("Scene", scene_id(s), "scenes not in (chapter, scene) order");
        }
        last_key = Some(key);
        by_chapter.entry(s.chapter_index).or_default().push(s);
    }

    for ch in &story.chapters {
        let scenes = by_chapter.remove(&ch.index).unwrap_or_default();
        if scenes.is_empty() {
            r.push("Chapter", format!("chapter {}", ch.index), "chapter has no scenes");
            continue;
        }
        let len = ch.line_count();
        let mut cursor = 0;
        for (i, s) in scenes.iter().enumerate() {
            let id = scene_id(s);
            if s.scene_index != i {
                r.push("Scene", &id, format!("scene_index {} at position {i}", s.scene_index));
            }
            if s.line_start != cursor || s.line_start >= s.line_end || s.line_end > len {
                r.push(
                    "Scene",
                    &id,
                    format!(
                        "scene partition broken: [{}, {}) after cursor {cursor} in chapter of {len} lines",
                        s.line_start, s.line_end
                    ),
                );
            }
            cursor = s.line_end;
            if i > 0 && s.boundary_explanation.trim().is_empty() {
                r.push("Scene", &id, "missing boundary explanation");
            }
            if !locations.contains(s.location_id.as_str()) {
                r.push("Scene", &id, format!("unknown location {:?}", s.location_id));
            }
            if !s.ratings.in_range() {
                r.push("Scene", &id, "ratings out of range");
            }
            let text = texts.get(ch.index).map(String::as_str).unwrap_or("");
            for a in &s.appearances {
                let known = match a.kind {
                    EntityKind::Character => characters.contains(a.entity_id.as_str()),
                    EntityKind::Theme => themes.contains(a.entity_id.as_str()),
                };
                let aid = format!("{id}/{}", a.entity_id);
                if !known {
                    r.push("EntityAppearance", &aid, format!("unknown {} id", a.kind.as_str()));
                }
                if !(-1.0..=1.0).contains(&a.sentiment) || !(0.0..=1.0).contains(&a.importance) {
                    r.push("EntityAppearance", &aid, "sentiment or importance out of range");
                }
                check_evidence(&a.evidence, &[text], "EntityAppearance", &aid, r);
            }
        }
        if cursor != len {
            r.push(
                "Chapter",
                format!("chapter {}", ch.index),
                format!("scene partition covers [0, {cursor}) of {len} lines"),
            );
        }
    }
    for (ci, scenes) in by_chapter {
        for s in scenes {
            r.push("Scene", scene_id(s), format!("chapter {ci} does not exist"));
        }
    }
}

fn scene_id(s: &Scene) -> String {
    format!("{}.{}", s.chapter_index, s.scene_index)
}

fn check_entities(story: &StoryData, texts: &[String], r: &mut Report) {
    let all_texts: Vec<&str> = texts.iter().map(String::as_str).collect();
    let groups: BTreeSet<&str> = story.groups.iter().map(|g| g.group_id.as_str()).collect();
    if groups.len() != story.groups.len() {
        r.push("StoryData", "groups", "duplicate group ids");
    }

    let mut ids = BTreeSet::new();
    let mut alias_owner: HashMap<&str, &str> = HashMap::new();
    for c in &story.characters {
        let id = c.entity_id.as_str();
        if !ids.insert(id) {
            r.push("CharacterEntry", id, "duplicate id");
        }
        if !c.aliases.contains(&c.canonical_name) {
            r.push("CharacterEntry", id, "canonical_name missing from aliases");
        }
        for alias in &c.aliases {
            if let Some(other) = alias_owner.insert(alias.as_str(), id) {
                r.push("CharacterEntry", id, format!("alias {alias:?} shared with {other}"));
            }
        }
        if !is_hex_color(&c.color) {
            r.push("CharacterEntry", id, format!("bad color {:?}", c.color));
        }
        if !groups.contains(c.group_id.as_str()) {
            r.push("CharacterEntry", id, format!("unknown group {:?}", c.group_id));
        }
        check_evidence(&c.representative_quote, &all_texts, "CharacterEntry", id, r);
    }

    let mut ids = BTreeSet::new();
    let mut alias_owner: HashMap<&str, &str> = HashMap::new();
    for l in &story.locations {
        let id = l.entity_id.as_str();
        if !ids.insert(id) {
            r.push("LocationEntry", id, "duplicate id");
        }
        if !l.aliases.contains(&l.canonical_name) {
            r.push("LocationEntry", id, "canonical_name missing from aliases");
        }
        for alias in &l.aliases {
            if let Some(other) = alias_owner.insert(alias.as_str(), id) {
                r.push("LocationEntry", id, format!("alias {alias:?} shared with {other}"));
            }
        }
        let fa = l.first_appearance;
        match story.scene(fa.chapter_index, fa.scene_index) {
            None => r.push("LocationEntry", id, "first_appearance references a missing scene"),
            Some(_) => {
                let first_use = story.scenes.iter().find(|s| s.location_id == id).map(Scene::pointer);
                if first_use.is_some_and(|p| p < fa) {
                    r.push("LocationEntry", id, "first_appearance is later than first use");
                }
            }
        }
        check_evidence(&l.representative_quote, &all_texts, "LocationEntry", id, r);
    }

    let mut ids = BTreeSet::new();
    for t in &story.themes {
        let id = t.entity_id.as_str();
        if !ids.insert(id) {
            r.push("ThemeEntry", id, "duplicate id");
        }
        if t.name.trim().is_empty() {
            r.push("ThemeEntry", id, "empty name");
        }
        if !is_hex_color(&t.color) {
            r.push("ThemeEntry", id, format!("bad color {:?}", t.color));
        }
    }
}

/// Character scene counts per chapter, recomputed from scene data.
pub fn recount_characters(story: &StoryData, chapter_index: usize) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in story.scenes_in(chapter_index) {
        let present: BTreeSet<&str> = s
            .appearances
            .iter()
            .filter(|a| a.kind == EntityKind::Character)
            .map(|a| a.entity_id.as_str())
            .collect();
        for id in present {
            *counts.entry(id.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn recount_locations(story: &StoryData, chapter_index: usize) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in story.scenes_in(chapter_index) {
        *counts.entry(s.location_id.clone()).or_insert(0) += 1;
    }
    counts
}

fn check_summaries(story: &StoryData, r: &mut Report) {
    if story.chapter_summaries.len() != story.chapters.len() {
        r.push(
            "StoryData",
            &story.meta.id,
            format!(
                "{} chapter summaries for {} chapters",
                story.chapter_summaries.len(),
                story.chapters.len()
            ),
        );
    }
    for (pos, cs) in story.chapter_summaries.iter().enumerate() {
        let id = format!("chapter {}", cs.chapter_index);
        if cs.chapter_index != pos {
            r.push("ChapterSummary", &id, "summaries out of chapter order");
        }
        if !cs.ratings.in_range() || !(0.0..=1.0).contains(&cs.length_norm) {
            r.push("ChapterSummary", &id, "ratings or length_norm out of range");
        }
        if recount_characters(story, cs.chapter_index) != cs.character_counts {
            r.push("ChapterSummary", &id, "character_counts do not match scene data");
        }
        if recount_locations(story, cs.chapter_index) != cs.location_counts {
            r.push("ChapterSummary", &id, "location_counts do not match scene data");
        }
        for it in &cs.interactions {
            if it.a >= it.b {
                r.push("ChapterSummary", &id, format!("interaction pair ({}, {}) not ordered", it.a, it.b));
            }
            let together = story.scenes_in(cs.chapter_index).any(|s| {
                s.has_entity(EntityKind::Character, &it.a) && s.has_entity(EntityKind::Character, &it.b)
            });
            if !together {
                r.push(
                    "ChapterSummary",
                    &id,
                    format!("interaction pair ({}, {}) never shares a scene", it.a, it.b),
                );
            }
        }
    }
}
