//! Canonical story data: the single artifact shared by the pipeline,
//! analytics, the HTTP service and the browser frontend.
//!
//! Scene line numbers are chapter-local and 0-based with an exclusive end;
//! chapter line numbers are story-global. Every persisted float is quantized
//! to four decimal places so that [`serial`] output round-trips exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub mod serial;
pub mod validate;

pub use serial::{deserialize, serialize, SerialError};
pub use validate::{validate, Violation};

/// Version tag written at the top of every `story.json`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Genre {
    Novel,
    Play,
    Poem,
    Nonfiction,
    LlmGenerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryMeta {
    pub id: String,
    pub title: String,
    pub author: String,
    pub genre: Genre,
    pub source: String,
    pub line_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub index: usize,
    pub title: String,
    /// Story-global, inclusive.
    pub line_start: usize,
    /// Story-global, exclusive.
    pub line_end: usize,
}

impl Chapter {
    pub fn line_count(&self) -> usize {
        self.line_end.saturating_sub(self.line_start)
    }
}

/// Rounds to four decimal places and folds `-0.0` into `0.0`.
pub fn quantize(x: f64) -> f64 {
    let q = (x * 10_000.0).round() / 10_000.0;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Clamps `x` into `[lo, hi]` and quantizes. NaN maps to the midpoint.
///
/// Returns the stored value and whether it had to be moved into range.
pub fn clamp_rating(x: f64, lo: f64, hi: f64) -> (f64, bool) {
    if x.is_nan() {
        return (quantize((lo + hi) / 2.0), true);
    }
    let clamped = x.clamp(lo, hi);
    (quantize(clamped), clamped != x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Ratings {
    /// `[0, 1]`
    pub importance: f64,
    /// `[0, 1]`
    pub conflict: f64,
    /// `[-1, 1]`
    pub sentiment: f64,
}

impl Ratings {
    /// Builds ratings from raw model output, clamping each field into range.
    /// The returned list names every field that was out of range.
    pub fn clamped(importance: f64, conflict: f64, sentiment: f64) -> (Self, Vec<String>) {
        let mut notes = Vec::new();
        let mut fix = |name: &str, raw: f64, lo: f64, hi: f64| {
            let (v, moved) = clamp_rating(raw, lo, hi);
            if moved {
                notes.push(format!("{name}={raw} clamped to {v}"));
            }
            v
        };
        let ratings = Ratings {
            importance: fix("importance", importance, 0.0, 1.0),
            conflict: fix("conflict", conflict, 0.0, 1.0),
            sentiment: fix("sentiment", sentiment, -1.0, 1.0),
        };
        (ratings, notes)
    }

    pub fn in_range(&self) -> bool {
        (0.0..=1.0).contains(&self.importance)
            && (0.0..=1.0).contains(&self.conflict)
            && (-1.0..=1.0).contains(&self.sentiment)
    }
}

/// What an [`EntityAppearance`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Character,
    Theme,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Character => "character",
            EntityKind::Theme => "theme",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            EntityKind::Character => "characters",
            EntityKind::Theme => "themes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceVariant {
    Quote,
    Explanation,
}

/// Either a verified verbatim quote or a model explanation standing in for one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub variant: EvidenceVariant,
    pub text: String,
    pub verified: bool,
}

impl Evidence {
    /// A quote that has already passed the substring check.
    pub fn verified_quote(text: impl Into<String>) -> Self {
        Evidence {
            variant: EvidenceVariant::Quote,
            text: text.into(),
            verified: true,
        }
    }

    pub fn explanation(text: impl Into<String>) -> Self {
        Evidence {
            variant: EvidenceVariant::Explanation,
            text: text.into(),
            verified: false,
        }
    }

    pub fn is_quote(&self) -> bool {
        self.variant == EvidenceVariant::Quote
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityAppearance {
    pub entity_id: String,
    pub kind: EntityKind,
    /// Significance of the entity within this scene, `[0, 1]`. Drives ribbon thickness.
    pub importance: f64,
    /// `[-1, 1]`
    pub sentiment: f64,
    pub emotion: String,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub chapter_index: usize,
    pub scene_index: usize,
    pub title: String,
    pub summary: String,
    pub location_id: String,
    /// Empty for the first scene of a chapter.
    pub boundary_explanation: String,
    /// Chapter-local, 0-based, inclusive.
    pub line_start: usize,
    /// Chapter-local, 0-based, exclusive.
    pub line_end: usize,
    pub ratings: Ratings,
    /// Why the top-ranked character is the most important one in this scene.
    #[serde(default)]
    pub importance_explanation: String,
    pub appearances: Vec<EntityAppearance>,
}

impl Scene {
    pub fn line_count(&self) -> usize {
        self.line_end.saturating_sub(self.line_start)
    }

    pub fn pointer(&self) -> ScenePointer {
        ScenePointer {
            chapter_index: self.chapter_index,
            scene_index: self.scene_index,
        }
    }

    pub fn has_entity(&self, kind: EntityKind, id: &str) -> bool {
        self.appearances
            .iter()
            .any(|a| a.kind == kind && a.entity_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScenePointer {
    pub chapter_index: usize,
    pub scene_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterEntry {
    pub entity_id: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub group_id: String,
    /// `#RRGGBB`
    pub color: String,
    pub color_explanation: String,
    pub representative_quote: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEntry {
    pub entity_id: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub first_appearance: ScenePointer,
    pub representative_quote: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeEntry {
    pub entity_id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Group {
    pub group_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub a: String,
    pub b: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterSummary {
    pub chapter_index: usize,
    pub summary: String,
    pub ratings: Ratings,
    /// Chapter lines divided by the longest chapter's lines.
    pub length_norm: f64,
    pub character_counts: BTreeMap<String, usize>,
    pub location_counts: BTreeMap<String, usize>,
    pub interactions: Vec<Interaction>,
}

/// Which dedup pass produced an alias merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AliasKind {
    Character,
    Location,
    Theme,
    Group,
}

impl AliasKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AliasKind::Character => "character",
            AliasKind::Location => "location",
            AliasKind::Theme => "theme",
            AliasKind::Group => "group",
        }
    }
}

impl From<EntityKind> for AliasKind {
    fn from(kind: EntityKind) -> Self {
        match kind {
            EntityKind::Character => AliasKind::Character,
            EntityKind::Theme => AliasKind::Theme,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasMerge {
    pub kind: AliasKind,
    pub raw_name: String,
    pub canonical_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ModelIds {
    pub extraction: String,
    pub dedup: String,
}

/// How many times each correction loop ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LoopRuns {
    pub quote_check: u32,
    pub entity_dedup: u32,
    pub group_dedup: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: String,
    pub message: String,
}

impl LogEntry {
    pub fn new(step: impl Into<String>, message: impl Into<String>) -> Self {
        LogEntry {
            step: step.into(),
            message: message.into(),
        }
    }
}

/// Record of what the correction loops and repairs did during one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ProvenanceLog {
    /// Quote candidates that went through the substring check.
    pub quotes_checked: usize,
    /// Checked candidates that failed and were replaced by an explanation.
    pub quotes_replaced: usize,
    /// Appearances for which the model offered no quote at all.
    #[serde(default)]
    pub quotes_missing: usize,
    pub alias_merges: Vec<AliasMerge>,
    pub group_merges: Vec<AliasMerge>,
    pub model_ids: ModelIds,
    #[serde(default)]
    pub loop_runs: LoopRuns,
    /// Automatic fixes applied to model output (clamps, partition repair, color collisions).
    #[serde(default)]
    pub repairs: Vec<LogEntry>,
    /// Degraded results: fallbacks taken after a model call failed or returned nothing usable.
    #[serde(default)]
    pub flags: Vec<LogEntry>,
    /// Wall-clock seconds per step. Left empty in `story.json` so the file is reproducible.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timings: BTreeMap<String, f64>,
}

impl ProvenanceLog {
    pub fn repair(&mut self, step: impl Into<String>, message: impl Into<String>) {
        let entry = LogEntry::new(step, message);
        tracing::warn!(step = %entry.step, "{}", entry.message);
        self.repairs.push(entry);
    }

    pub fn flag(&mut self, step: impl Into<String>, message: impl Into<String>) {
        let entry = LogEntry::new(step, message);
        tracing::warn!(step = %entry.step, "{}", entry.message);
        self.flags.push(entry);
    }

    /// Appends another log's entries and adds its counters.
    pub fn absorb(&mut self, other: ProvenanceLog) {
        self.quotes_checked += other.quotes_checked;
        self.quotes_replaced += other.quotes_replaced;
        self.quotes_missing += other.quotes_missing;
        self.alias_merges.extend(other.alias_merges);
        self.group_merges.extend(other.group_merges);
        self.repairs.extend(other.repairs);
        self.flags.extend(other.flags);
        self.loop_runs.quote_check += other.loop_runs.quote_check;
        self.loop_runs.entity_dedup += other.loop_runs.entity_dedup;
        self.loop_runs.group_dedup += other.loop_runs.group_dedup;
        for (k, v) in other.timings {
            *self.timings.entry(k).or_default() += v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryData {
    pub schema_version: u32,
    pub meta: StoryMeta,
    pub chapters: Vec<Chapter>,
    pub chapter_summaries: Vec<ChapterSummary>,
    pub scenes: Vec<Scene>,
    pub characters: Vec<CharacterEntry>,
    pub groups: Vec<Group>,
    pub locations: Vec<LocationEntry>,
    pub themes: Vec<ThemeEntry>,
    pub pipeline_log: ProvenanceLog,
}

impl StoryData {
    pub fn scenes_in(&self, chapter_index: usize) -> impl Iterator<Item = &Scene> {
        self.scenes
            .iter()
            .filter(move |s| s.chapter_index == chapter_index)
    }

    pub fn scene(&self, chapter_index: usize, scene_index: usize) -> Option<&Scene> {
        self.scenes
            .iter()
            .find(|s| s.chapter_index == chapter_index && s.scene_index == scene_index)
    }

    pub fn character(&self, id: &str) -> Option<&CharacterEntry> {
        self.characters.iter().find(|c| c.entity_id == id)
    }

    pub fn location(&self, id: &str) -> Option<&LocationEntry> {
        self.locations.iter().find(|l| l.entity_id == id)
    }

    pub fn theme(&self, id: &str) -> Option<&ThemeEntry> {
        self.themes.iter().find(|t| t.entity_id == id)
    }

    /// Display name for an entity id of the given kind.
    pub fn entity_name(&self, kind: EntityKind, id: &str) -> Option<&str> {
        match kind {
            EntityKind::Character => self.character(id).map(|c| c.canonical_name.as_str()),
            EntityKind::Theme => self.theme(id).map(|t| t.name.as_str()),
        }
    }

    /// Entity ids of `kind` in order of first appearance in the story.
    pub fn entities_by_first_appearance(&self, kind: EntityKind) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for scene in &self.scenes {
            for a in scene.appearances.iter().filter(|a| a.kind == kind) {
                if !seen.contains(&a.entity_id) {
                    seen.push(a.entity_id.clone());
                }
            }
        }
        let all: Vec<&str> = match kind {
            EntityKind::Character => self.characters.iter().map(|c| c.entity_id.as_str()).collect(),
            EntityKind::Theme => self.themes.iter().map(|t| t.entity_id.as_str()).collect(),
        };
        for id in all {
            if !seen.iter().any(|s| s == id) {
                seen.push(id.to_string());
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_rule() {
        let (r, notes) = Ratings::clamped(1.3, 0.5, -2.0);
        assert_eq!(r.importance, 1.0);
        assert_eq!(r.conflict, 0.5);
        assert_eq!(r.sentiment, -1.0);
        assert_eq!(notes.len(), 2);
        assert!(r.in_range());
    }

    #[test]
    fn nan_rating_goes_to_midpoint() {
        assert_eq!(clamp_rating(f64::NAN, -1.0, 1.0), (0.0, true));
        assert_eq!(clamp_rating(f64::NAN, 0.0, 1.0), (0.5, true));
    }

    #[test]
    fn quantize_folds_negative_zero() {
        assert_eq!(quantize(-0.00001).to_bits(), 0.0f64.to_bits());
        assert_eq!(quantize(0.123456), 0.1235);
    }
}
