//! The extraction pipeline: chapters in, [`StoryData`] out.
//!
//! Chapters are segmented and detailed concurrently, then the three
//! correction loops run over the whole story: quote verification, entity
//! dedup and group dedup. Results are merged in chapter order so a run is a
//! pure function of the chapter texts and the model replies.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::time::Instant;

use futures::stream::{self, StreamExt};

use crate::llm::Gateway;
use crate::model::{
    self, AliasKind, AliasMerge, Chapter, CharacterEntry, EntityAppearance, EntityKind, Evidence,
    Group, LocationEntry, ProvenanceLog, Scene, ScenePointer, StoryData, StoryMeta, ThemeEntry,
    Violation, SCHEMA_VERSION,
};
use crate::store::{StoreError, StoryStore};
use crate::text::unique_slug;

pub mod color;
pub mod dedup;
pub mod detail;
pub mod profiles;
pub mod prompts;
pub mod quotes;
pub mod segment;
pub mod summarize;

use dedup::{dedup_entities, AliasMap};
use profiles::EntityContext;
use quotes::ChapterDrafts;
use segment::SceneDraft;

/// Which entity kinds to extract per scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    Characters,
    Themes,
    #[default]
    Both,
}

impl Target {
    pub fn kinds(self) -> &'static [EntityKind] {
        match self {
            Target::Characters => &[EntityKind::Character],
            Target::Themes => &[EntityKind::Theme],
            Target::Both => &[EntityKind::Character, EntityKind::Theme],
        }
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "characters" => Ok(Target::Characters),
            "themes" => Ok(Target::Themes),
            "both" => Ok(Target::Both),
            other => Err(format!("unknown target {other:?} (characters, themes, both)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub target: Target,
    /// Keep going when a chapter's model calls fail for good.
    pub allow_partial: bool,
    /// Chapter tasks and fan-out batches run at most this wide.
    pub concurrency: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            target: Target::Both,
            allow_partial: false,
            concurrency: 8,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{} chapter(s) failed; rerun with --allow-partial to keep partial results:\n{}", .0.len(), .0.join("\n"))]
    ChaptersFailed(Vec<String>),
    #[error("output failed validation with {} violation(s):\n{}", .violations.len(), join_violations(.violations))]
    Invalid {
        story: Box<StoryData>,
        violations: Vec<Violation>,
    },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Everything the pipeline reads: metadata, chapter ranges and chapter texts.
#[derive(Debug, Clone)]
pub struct StoryInput {
    pub meta: StoryMeta,
    pub chapters: Vec<Chapter>,
    pub texts: Vec<String>,
}

impl StoryInput {
    /// Reads an ingested story from the data directory.
    pub fn load(store: &StoryStore, id: &str) -> Result<Self, PipelineError> {
        let config = store.read_config(id)?;
        let index = store.read_chapter_index(id)?;
        let texts = store.read_chapter_texts(id, index.chapters.len())?;
        Ok(StoryInput {
            meta: config.meta(index.line_count),
            chapters: index.chapters,
            texts,
        })
    }
}

/// Plain text of chapter-local lines `start..end`.
pub(crate) fn scene_lines(chapter_text: &str, start: usize, end: usize) -> String {
    chapter_text
        .lines()
        .skip(start)
        .take(end.saturating_sub(start))
        .collect::<Vec<_>>()
        .join("\n")
}

struct ChapterOutcome {
    drafts: Vec<SceneDraft>,
    log: ProvenanceLog,
    failures: Vec<String>,
}

async fn chapter_scenes(
    gateway: &Gateway,
    chapter: &Chapter,
    text: &str,
    kinds: &[EntityKind],
    limit: usize,
) -> ChapterOutcome {
    let ci = chapter.index;
    let mut log = ProvenanceLog::default();
    let mut failures = Vec::new();
    let drafts = match segment::segment_chapter(gateway, ci, &chapter.title, text, &mut log).await {
        Ok(d) => d,
        Err(e) => {
            log.flag(format!("segment/ch{ci}"), format!("segmentation failed ({e}); chapter kept as one scene"));
            failures.push(format!("chapter {ci}: {e}"));
            vec![SceneDraft::whole_chapter(&chapter.title, text.lines().count())]
        }
    };
    let detailed: Vec<_> = stream::iter(drafts.into_iter().enumerate())
        .map(|(si, mut draft)| async move {
            let mut log = ProvenanceLog::default();
            let result = detail::detail_scene(gateway, ci, si, kinds, &mut draft, text, &mut log).await;
            (draft, log, result)
        })
        .buffered(limit.max(1))
        .collect()
        .await;
    let mut drafts = Vec::with_capacity(detailed.len());
    for (si, (draft, scene_log, result)) in detailed.into_iter().enumerate() {
        log.absorb(scene_log);
        if let Err(e) = result {
            log.flag(format!("detail/ch{ci}/s{si}"), format!("scene details incomplete: {e}"));
            failures.push(format!("chapter {ci} scene {si}: {e}"));
        }
        drafts.push(draft);
    }
    ChapterOutcome { drafts, log, failures }
}

/// Canonical name to entity id, slugs unique within the kind.
fn assign_ids(map: &AliasMap, fallback: &str) -> BTreeMap<String, String> {
    let mut taken = BTreeSet::new();
    map.groups()
        .into_keys()
        .map(|canon| {
            let id = unique_slug(&canon, fallback, &mut taken);
            (canon, id)
        })
        .collect()
}

fn record_merges(map: &AliasMap, ids: &BTreeMap<String, String>, out: &mut Vec<AliasMerge>) {
    for (raw, canon) in &map.entries {
        if raw != canon {
            out.push(AliasMerge {
                kind: map.kind,
                raw_name: raw.clone(),
                canonical_id: ids[canon].clone(),
            });
        }
    }
}

fn time_step(log: &mut ProvenanceLog, name: &str, start: Instant) {
    log.timings.insert(name.to_string(), model::quantize(start.elapsed().as_secs_f64()));
}

/// Runs the whole pipeline over one story.
pub async fn run_pipeline(
    gateway: &Gateway,
    input: &StoryInput,
    config: &PipelineConfig,
) -> Result<StoryData, PipelineError> {
    if input.texts.len() != input.chapters.len() {
        return Err(PipelineError::Input(format!(
            "{} chapter texts for {} chapters",
            input.texts.len(),
            input.chapters.len()
        )));
    }
    let limit = config.concurrency.max(1);
    let kinds = config.target.kinds();
    let started = Instant::now();
    let mut log = ProvenanceLog {
        model_ids: gateway.model_ids(),
        ..ProvenanceLog::default()
    };

    // Scenes and per-scene details, chapter tasks in parallel.
    let t = Instant::now();
    let outcomes: Vec<ChapterOutcome> = stream::iter(input.chapters.iter().zip(&input.texts))
        .map(|(ch, text)| chapter_scenes(gateway, ch, text, kinds, limit))
        .buffered(limit)
        .collect()
        .await;
    let mut failures = Vec::new();
    let mut drafts: Vec<Vec<SceneDraft>> = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        log.absorb(o.log);
        failures.extend(o.failures);
        drafts.push(o.drafts);
    }
    if !failures.is_empty() && !config.allow_partial {
        return Err(PipelineError::ChaptersFailed(failures));
    }
    time_step(&mut log, "scenes", t);

    // Loop 1: quotes.
    let t = Instant::now();
    let mut views: Vec<ChapterDrafts> = input
        .chapters
        .iter()
        .zip(&input.texts)
        .zip(drafts.iter_mut())
        .map(|((ch, text), d)| ChapterDrafts {
            chapter_index: ch.index,
            text,
            drafts: d,
        })
        .collect();
    log.absorb(quotes::verify_quotes(gateway, &mut views, limit).await);
    time_step(&mut log, "quote_check", t);

    // Loop 2: entity dedup.
    let t = Instant::now();
    let mut character_names = BTreeSet::new();
    let mut theme_names = BTreeSet::new();
    let mut location_names = BTreeSet::new();
    for d in drafts.iter().flatten() {
        location_names.insert(d.location_name.clone());
        for a in &d.raw_appearances {
            match a.kind {
                EntityKind::Character => character_names.insert(a.raw_name.clone()),
                EntityKind::Theme => theme_names.insert(a.raw_name.clone()),
            };
        }
    }
    let ((char_map, l1), (loc_map, l2), (theme_map, l3)) = futures::join!(
        dedup_entities(gateway, &character_names, AliasKind::Character),
        dedup_entities(gateway, &location_names, AliasKind::Location),
        dedup_entities(gateway, &theme_names, AliasKind::Theme),
    );
    log.absorb(l1);
    log.absorb(l2);
    log.absorb(l3);
    log.loop_runs.entity_dedup += 1;
    let char_ids = assign_ids(&char_map, "character");
    let loc_ids = assign_ids(&loc_map, "location");
    let theme_ids = assign_ids(&theme_map, "theme");
    record_merges(&char_map, &char_ids, &mut log.alias_merges);
    record_merges(&loc_map, &loc_ids, &mut log.alias_merges);
    record_merges(&theme_map, &theme_ids, &mut log.alias_merges);
    time_step(&mut log, "entity_dedup", t);

    // Apply aliases.
    let resolve = |kind: EntityKind, raw: &str| -> String {
        let (map, ids) = match kind {
            EntityKind::Character => (&char_map, &char_ids),
            EntityKind::Theme => (&theme_map, &theme_ids),
        };
        ids[map.canonical(raw).expect("alias map is total")].clone()
    };
    let mut scenes = Vec::new();
    for (ch, chapter_drafts) in input.chapters.iter().zip(drafts) {
        for (si, d) in chapter_drafts.into_iter().enumerate() {
            let mut appearances: Vec<EntityAppearance> = Vec::new();
            for a in d.raw_appearances {
                let entity_id = resolve(a.kind, &a.raw_name);
                let evidence = a.evidence.unwrap_or_else(|| Evidence::explanation(a.emotion.clone()));
                if let Some(existing) = appearances
                    .iter_mut()
                    .find(|e| e.kind == a.kind && e.entity_id == entity_id)
                {
                    log.repair(
                        format!("aliases/ch{}/s{si}", ch.index),
                        format!("{} merged into {entity_id} within the scene", a.raw_name),
                    );
                    if !existing.evidence.is_quote() && evidence.is_quote() {
                        existing.evidence = evidence;
                    }
                    continue;
                }
                appearances.push(EntityAppearance {
                    entity_id,
                    kind: a.kind,
                    importance: a.importance,
                    sentiment: a.sentiment,
                    emotion: a.emotion,
                    evidence,
                });
            }
            let location_id = loc_ids[loc_map.canonical(&d.location_name).expect("alias map is total")].clone();
            scenes.push(Scene {
                chapter_index: ch.index,
                scene_index: si,
                title: d.title,
                summary: d.summary,
                location_id,
                boundary_explanation: d.boundary_explanation,
                line_start: d.line_start,
                line_end: d.line_end,
                ratings: d.ratings,
                importance_explanation: d.importance_explanation,
                appearances,
            });
        }
    }

    // Chapter summaries.
    let t = Instant::now();
    let id_to_name: BTreeMap<String, String> = char_ids.iter().map(|(n, id)| (id.clone(), n.clone())).collect();
    let (chapter_summaries, l) =
        summarize::summarize_chapters(gateway, &input.chapters, &scenes, &id_to_name, limit).await;
    log.absorb(l);
    time_step(&mut log, "chapter_summaries", t);

    // Entity profiles.
    let t = Instant::now();
    let texts: Vec<&str> = input.texts.iter().map(String::as_str).collect();
    let char_order = first_appearance_order(&scenes, |s| {
        s.appearances
            .iter()
            .filter(|a| a.kind == EntityKind::Character)
            .map(|a| a.entity_id.clone())
            .collect()
    });
    let theme_order = first_appearance_order(&scenes, |s| {
        s.appearances
            .iter()
            .filter(|a| a.kind == EntityKind::Theme)
            .map(|a| a.entity_id.clone())
            .collect()
    });
    let loc_order = first_appearance_order(&scenes, |s| vec![s.location_id.clone()]);

    let char_groups = char_map.groups();
    let char_ctx: Vec<EntityContext> = char_order
        .iter()
        .map(|(id, _)| {
            let name = id_to_name[id].clone();
            EntityContext {
                id: id.clone(),
                aliases: char_groups[&name].clone(),
                context: entity_context(&scenes, |s| s.has_entity(EntityKind::Character, id)),
                name,
            }
        })
        .collect();
    let loc_groups = loc_map.groups();
    let loc_id_to_name: BTreeMap<&String, &String> = loc_ids.iter().map(|(n, id)| (id, n)).collect();
    let loc_ctx: Vec<EntityContext> = loc_order
        .iter()
        .map(|(id, _)| {
            let name = loc_id_to_name[id].clone();
            EntityContext {
                id: id.clone(),
                aliases: loc_groups[&name].clone(),
                context: entity_context(&scenes, |s| &s.location_id == id),
                name,
            }
        })
        .collect();
    let theme_groups = theme_map.groups();
    let theme_id_to_name: BTreeMap<&String, &String> = theme_ids.iter().map(|(n, id)| (id, n)).collect();
    let theme_list: Vec<String> = theme_order.iter().map(|(id, _)| theme_id_to_name[id].clone()).collect();

    let ((char_drafts, l1), (loc_quotes, l2), (mut theme_colors, l3)) = futures::join!(
        profiles::character_profiles(gateway, &char_ctx, &texts, limit),
        profiles::location_quotes(gateway, &loc_ctx, &texts, limit),
        profiles::theme_colors(gateway, &theme_list),
    );
    log.absorb(l1);
    log.absorb(l2);
    log.absorb(l3);
    time_step(&mut log, "entity_profiles", t);

    // Loop 3: group dedup.
    let t = Instant::now();
    let labels: BTreeSet<String> = char_drafts.iter().map(|d| d.group_label.clone()).collect();
    let (group_map, l) = dedup_entities(gateway, &labels, AliasKind::Group).await;
    log.absorb(l);
    if !labels.is_empty() {
        log.loop_runs.group_dedup += 1;
    }
    let group_ids = assign_ids(&group_map, "group");
    record_merges(&group_map, &group_ids, &mut log.group_merges);
    time_step(&mut log, "group_dedup", t);

    // Assemble.
    let mut char_colors: Vec<String> = char_drafts.iter().map(|d| d.color.clone()).collect();
    for (i, old, new) in color::make_distinct(&mut char_colors) {
        log.repair("colors", format!("{}: color {old} taken; moved to {new}", char_ctx[i].id));
    }
    for (i, old, new) in color::make_distinct(&mut theme_colors) {
        log.repair("colors", format!("theme {}: color {old} taken; moved to {new}", theme_order[i].0));
    }

    let mut groups: Vec<Group> = Vec::new();
    let characters: Vec<CharacterEntry> = char_ctx
        .into_iter()
        .zip(char_drafts)
        .zip(char_colors)
        .map(|((ctx, d), color)| {
            let canon = group_map.canonical(&d.group_label).expect("alias map is total");
            let group_id = group_ids[canon].clone();
            if !groups.iter().any(|g| g.group_id == group_id) {
                groups.push(Group {
                    group_id: group_id.clone(),
                    label: canon.to_string(),
                });
            }
            CharacterEntry {
                entity_id: ctx.id,
                canonical_name: ctx.name,
                aliases: ctx.aliases,
                group_id,
                color,
                color_explanation: d.color_explanation,
                representative_quote: d.quote,
            }
        })
        .collect();
    let locations: Vec<LocationEntry> = loc_ctx
        .into_iter()
        .zip(loc_quotes)
        .zip(&loc_order)
        .map(|((ctx, quote), (_, first))| LocationEntry {
            entity_id: ctx.id,
            canonical_name: ctx.name,
            aliases: ctx.aliases,
            first_appearance: *first,
            representative_quote: quote,
        })
        .collect();
    let themes: Vec<ThemeEntry> = theme_order
        .iter()
        .zip(theme_list)
        .zip(theme_colors)
        .map(|(((id, _), name), color)| ThemeEntry {
            entity_id: id.clone(),
            aliases: theme_groups[&name].clone(),
            name,
            color,
        })
        .collect();

    time_step(&mut log, "total", started);
    let story = StoryData {
        schema_version: SCHEMA_VERSION,
        meta: input.meta.clone(),
        chapters: input.chapters.clone(),
        chapter_summaries,
        scenes,
        characters,
        groups,
        locations,
        themes,
        pipeline_log: log,
    };
    let violations = model::validate(&story, &input.texts);
    if violations.is_empty() {
        Ok(story)
    } else {
        Err(PipelineError::Invalid {
            story: Box::new(story),
            violations,
        })
    }
}

/// Ids in order of first appearance with the scene where each first appears.
fn first_appearance_order(scenes: &[Scene], ids_of: impl Fn(&Scene) -> Vec<String>) -> Vec<(String, ScenePointer)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in scenes {
        for id in ids_of(s) {
            if seen.insert(id.clone()) {
                out.push((id, s.pointer()));
            }
        }
    }
    out
}

/// Up to a dozen scene lines describing where an entity appears.
fn entity_context(scenes: &[Scene], pred: impl Fn(&Scene) -> bool) -> String {
    scenes
        .iter()
        .filter(|s| pred(s))
        .take(12)
        .map(|s| format!("- ch{} s{} {}: {}\n", s.chapter_index, s.scene_index, s.title, s.summary))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_parses() {
        assert_eq!("both".parse::<Target>().unwrap().kinds().len(), 2);
        assert_eq!("themes".parse::<Target>().unwrap(), Target::Themes);
        assert!("places".parse::<Target>().is_err());
    }

    #[test]
    fn scene_lines_slice() {
        assert_eq!(scene_lines("a\nb\nc\nd\n", 1, 3), "b\nc");
    }
}
