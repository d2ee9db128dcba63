//! Scene segmentation and partition repair.
//!
//! The model sees the chapter with 1-based line numbers and returns
//! inclusive `[start_line, end_line]` ranges. These become 0-based,
//! end-exclusive scene ranges, repaired into a partition of the chapter.

use crate::llm::schema::{SceneSpan, SceneSplit};
use crate::llm::{Gateway, LlmError, LlmRequest, ModelRole, SchemaTag};
use crate::model::{EntityKind, Evidence, ProvenanceLog, Ratings};

use super::prompts;

/// Location name used when a scene has none.
pub const UNKNOWN_LOCATION: &str = "Unknown location";

/// One entity mention as extracted, before dedup.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAppearance {
    pub raw_name: String,
    pub kind: EntityKind,
    pub importance: f64,
    pub sentiment: f64,
    pub emotion: String,
    pub quote_candidate: Option<String>,
    /// Filled by the quote check.
    pub evidence: Option<Evidence>,
}

/// A scene before entity dedup.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDraft {
    pub title: String,
    pub summary: String,
    pub location_name: String,
    pub boundary_explanation: String,
    /// Chapter-local, 0-based, inclusive.
    pub line_start: usize,
    /// Chapter-local, 0-based, exclusive.
    pub line_end: usize,
    pub ratings: Ratings,
    pub importance_explanation: String,
    pub raw_appearances: Vec<RawAppearance>,
}

impl SceneDraft {
    /// The whole chapter as one scene; used when segmentation is unusable.
    pub fn whole_chapter(title: &str, line_count: usize) -> Self {
        SceneDraft {
            title: title.to_string(),
            summary: String::new(),
            location_name: UNKNOWN_LOCATION.to_string(),
            boundary_explanation: String::new(),
            line_start: 0,
            line_end: line_count,
            ratings: Ratings {
                importance: 0.5,
                conflict: 0.5,
                sentiment: 0.0,
            },
            importance_explanation: String::new(),
            raw_appearances: Vec::new(),
        }
    }
}

/// Result of [`repair_partition`]: surviving input indices with their
/// repaired 0-based half-open ranges, in line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repaired {
    pub kept: Vec<(usize, usize, usize)>,
    pub notes: Vec<String>,
}

/// Turns model ranges (1-based, inclusive) into a partition of `0..n`.
///
/// Ranges are clipped to the chapter and ordered by start. Overlaps go to
/// the earlier scene; scenes left empty are dropped. A gap is absorbed by
/// the scene before it, a leading gap by the first scene, a trailing gap by
/// the last. `kept` is empty only when no range survives.
///
/// ```
/// use ribbons_core::pipeline::segment::repair_partition;
/// // lines 1-10 and 12-20 of a 20-line chapter: line 11 is a gap
/// let r = repair_partition(&[(1, 10), (12, 20)], 20);
/// assert_eq!(r.kept, vec![(0, 0, 11), (1, 11, 20)]);
/// assert_eq!(r.notes.len(), 1);
/// ```
pub fn repair_partition(ranges: &[(i64, i64)], n: usize) -> Repaired {
    let mut notes = Vec::new();
    let n_i = n as i64;
    let mut items: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &(start, end)) in ranges.iter().enumerate() {
        let (s, e) = (start.saturating_sub(1), end);
        let (cs, ce) = (s.clamp(0, n_i), e.clamp(0, n_i));
        if (cs, ce) != (s, e) {
            notes.push(format!("scene {i}: range {start}-{end} clipped to the chapter"));
        }
        if cs >= ce {
            notes.push(format!("scene {i}: empty range {start}-{end} dropped"));
            continue;
        }
        items.push((i, cs as usize, ce as usize));
    }
    if items.windows(2).any(|w| w[1].1 < w[0].1) {
        notes.push("scenes reordered by start line".to_string());
    }
    items.sort_by_key(|&(i, s, _)| (s, i));

    let mut kept: Vec<(usize, usize, usize)> = Vec::new();
    let mut cursor = 0usize;
    for (i, mut s, e) in items {
        if s < cursor {
            if e <= cursor {
                notes.push(format!("scene {i}: covered by an earlier scene, dropped"));
                continue;
            }
            notes.push(format!("scene {i}: overlap with previous scene trimmed"));
            s = cursor;
        }
        if s > cursor {
            match kept.last_mut() {
                Some(prev) => {
                    notes.push(format!("gap of {} line(s) before scene {i} given to previous scene", s - cursor));
                    prev.2 = s;
                }
                None => {
                    notes.push(format!("leading gap of {s} line(s) given to scene {i}"));
                    s = 0;
                }
            }
        }
        kept.push((i, s, e));
        cursor = e;
    }
    if let Some(last) = kept.last_mut() {
        if last.2 < n {
            notes.push(format!("trailing gap of {} line(s) given to last scene", n - last.2));
            last.2 = n;
        }
    }
    Repaired { kept, notes }
}

/// Applies [`repair_partition`] to the model's scenes and enforces the
/// boundary-explanation rule. Never returns an empty list for `n > 0`.
pub fn drafts_from_split(
    split: SceneSplit,
    chapter_title: &str,
    n: usize,
    step: &str,
    log: &mut ProvenanceLog,
) -> Vec<SceneDraft> {
    let ranges: Vec<(i64, i64)> = split.scenes.iter().map(|s| (s.start_line, s.end_line)).collect();
    let repaired = repair_partition(&ranges, n);
    for note in repaired.notes {
        log.repair(step, note);
    }
    if repaired.kept.is_empty() {
        log.flag(step, "no usable scene ranges; chapter kept as a single scene");
        return vec![SceneDraft::whole_chapter(chapter_title, n)];
    }
    let mut drafts: Vec<SceneDraft> = repaired
        .kept
        .iter()
        .map(|&(i, s, e)| span_to_draft(&split.scenes[i], s, e))
        .collect();
    for (si, d) in drafts.iter_mut().enumerate() {
        if si == 0 {
            d.boundary_explanation.clear();
        } else if d.boundary_explanation.trim().is_empty() {
            log.repair(step, format!("scene {si}: missing boundary explanation filled"));
            d.boundary_explanation = "The model gave no reason for this boundary.".to_string();
        }
        if d.location_name.trim().is_empty() {
            d.location_name = UNKNOWN_LOCATION.to_string();
        }
    }
    drafts
}

fn span_to_draft(span: &SceneSpan, start: usize, end: usize) -> SceneDraft {
    SceneDraft {
        title: span.title.trim().to_string(),
        summary: span.summary.trim().to_string(),
        location_name: span.location.trim().to_string(),
        boundary_explanation: span.boundary_explanation.trim().to_string(),
        line_start: start,
        line_end: end,
        ratings: Ratings::default(),
        importance_explanation: String::new(),
        raw_appearances: Vec::new(),
    }
}

/// Asks the model to split one chapter into scenes.
pub async fn segment_chapter(
    gateway: &Gateway,
    chapter_index: usize,
    chapter_title: &str,
    chapter_text: &str,
    log: &mut ProvenanceLog,
) -> Result<Vec<SceneDraft>, LlmError> {
    let n = chapter_text.lines().count();
    let request = LlmRequest::new(
        format!("scene_split/ch{chapter_index}"),
        SchemaTag::SceneSplit,
        ModelRole::Extraction,
    )
    .system(prompts::scene_split_system())
    .user(prompts::scene_split_user(chapter_title, chapter_text));
    let (split, _) = gateway.complete_as::<SceneSplit>(request).await?;
    Ok(drafts_from_split(split, chapter_title, n, &format!("segment/ch{chapter_index}"), log))
}
