//! Prompt text. Every system prompt ends with the reply shape so the model
//! knows which JSON object to produce.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::ingest::number_chapter_text;
use crate::llm::SchemaTag;
use crate::model::{AliasKind, EntityKind};

use super::segment::SceneDraft;

fn with_shape(body: &str, schema: SchemaTag) -> String {
    format!(
        "{body}\n\nReply with a single JSON object and nothing else, of the form:\n{}",
        schema.shape_hint()
    )
}

pub fn scene_split_system() -> String {
    with_shape(
        "You divide chapters of fiction into scenes. A scene is a continuous span of \
         text set in one place and time with a stable set of characters. Start a new \
         scene when the time changes, the location changes, the set of characters \
         changes, or the narrative focus shifts.\n\
         The chapter is given with 1-based line numbers. Give every scene an inclusive \
         start_line and end_line; together the scenes must cover every line exactly once. \
         For each scene give a short title, a one or two sentence summary, the location \
         where it takes place, and a boundary_explanation saying why the scene begins \
         where it does (leave it empty for the first scene).",
        SchemaTag::SceneSplit,
    )
}

pub fn scene_split_user(chapter_title: &str, chapter_text: &str) -> String {
    format!("Chapter: {chapter_title}\n\n{}", number_chapter_text(chapter_text))
}

pub fn scene_detail_system(kind: EntityKind) -> String {
    let task = match kind {
        EntityKind::Character => {
            "List every character who appears in or is substantially discussed in the scene. \
             For each give: name (as written in the text), importance within the scene \
             (0 to 1), sentiment (-1 very negative to 1 very positive), a short phrase for \
             their emotions, and one quote copied verbatim from the scene that shows those \
             emotions. Do not paraphrase or change the point of view of the quote. Also \
             explain in importance_explanation why the most important character is the \
             most important one."
        }
        EntityKind::Theme => {
            "List the main themes present in the scene, as short noun phrases. For each give \
             importance within the scene (0 to 1), sentiment (-1 to 1), an emotion phrase \
             if one fits, and one quote copied verbatim from the scene that best shows the \
             theme. Do not paraphrase the quote."
        }
    };
    with_shape(
        &format!(
            "You analyze one scene of a work of fiction. Rate the whole scene: importance to \
             the story (0 to 1), conflict (0 to 1) and sentiment (-1 to 1).\n{task}"
        ),
        SchemaTag::SceneDetail,
    )
}

pub fn scene_detail_user(draft: &SceneDraft, chapter_text: &str) -> String {
    let mut out = format!("Scene: {}\nSummary: {}\n\n", draft.title, draft.summary);
    for (i, line) in chapter_text
        .lines()
        .enumerate()
        .skip(draft.line_start)
        .take(draft.line_end - draft.line_start)
    {
        let _ = writeln!(out, "{}: {line}", i + 1);
    }
    out
}

pub fn quote_explanation_system() -> String {
    with_shape(
        "No quote from the text is available for this entity in this scene. In one or two \
         sentences, explain the emotions or significance of the entity in the scene, \
         based only on the scene text.",
        SchemaTag::Explanation,
    )
}

pub fn quote_explanation_user(name: &str, kind: EntityKind, emotion: &str, scene_text: &str) -> String {
    format!(
        "{} : {name}\nReported emotion: {emotion}\n\nScene text:\n{scene_text}",
        kind.as_str()
    )
}

pub fn entity_explanation_user(kind: &str, name: &str, context: &str) -> String {
    format!("{kind}: {name}\n\nWhere it appears:\n{context}")
}

pub fn dedup_system(kind: AliasKind) -> String {
    let what = match kind {
        AliasKind::Character => "character names; the same person may be called by a first name, a surname, a title or a nickname",
        AliasKind::Location => "location names; the same place may be described in several ways",
        AliasKind::Theme => "theme names; near-synonymous themes should be merged",
        AliasKind::Group => "character group labels; labels describing the same group should be merged",
    };
    with_shape(
        &format!(
            "You are given a list of {what}. Group together the names that refer to the same \
             thing. Every name must appear in exactly one group; names with no duplicates \
             form a group of one. Use the names exactly as given."
        ),
        SchemaTag::Dedup,
    )
}

pub fn dedup_user(names: &BTreeSet<String>) -> String {
    names.iter().map(|n| format!("- {n}\n")).collect()
}

pub fn chapter_summary_system() -> String {
    with_shape(
        "Summarize a chapter of fiction in two to four sentences and rate the chapter's \
         importance to the story (0 to 1), conflict (0 to 1) and sentiment (-1 to 1).",
        SchemaTag::ChapterSummary,
    )
}

pub fn chapter_summary_user(chapter_title: &str, scene_summaries: &[String]) -> String {
    let mut out = format!("Chapter: {chapter_title}\nScenes:\n");
    for (i, s) in scene_summaries.iter().enumerate() {
        let _ = writeln!(out, "{}. {s}", i + 1);
    }
    out
}

pub fn interaction_system() -> String {
    with_shape(
        "Summarize in one or two sentences how the two characters interact in this chapter.",
        SchemaTag::Interaction,
    )
}

pub fn interaction_user(a: &str, b: &str, scene_summaries: &[String]) -> String {
    let mut out = format!("Characters: {a} and {b}\nScenes where both appear:\n");
    for s in scene_summaries {
        let _ = writeln!(out, "- {s}");
    }
    out
}

pub fn character_profile_system() -> String {
    with_shape(
        "Describe one character of a story. Give a representative quote copied verbatim \
         from the text (spoken by or about the character), a short label for the group \
         the character belongs to (for example a family or a faction), a color that suits \
         the character as #RRGGBB, and one sentence explaining the color.",
        SchemaTag::CharacterProfile,
    )
}

pub fn location_profile_system() -> String {
    with_shape(
        "Give one quote copied verbatim from the text that best describes this location.",
        SchemaTag::LocationProfile,
    )
}

pub fn profile_user(name: &str, aliases: &[String], context: &str) -> String {
    format!(
        "Name: {name}\nAlso called: {}\n\nScenes:\n{context}",
        aliases.join(", ")
    )
}

pub fn theme_colors_system() -> String {
    with_shape(
        "Assign each theme a distinct color as #RRGGBB that suits it.",
        SchemaTag::ThemeColors,
    )
}

pub fn theme_colors_user(names: &[String]) -> String {
    names.iter().map(|n| format!("- {n}\n")).collect()
}

pub fn boundary_classify_system() -> String {
    with_shape(
        "Each line is an explanation of why a new scene starts. Label each one with exactly \
         one of: time_change, location_change, character_change, focus_shift, \
         character_action. Return the labels in input order.",
        SchemaTag::BoundaryLabels,
    )
}

pub fn numbered_list(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}\n", i + 1))
        .collect()
}
