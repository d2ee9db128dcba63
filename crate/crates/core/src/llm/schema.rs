//! Registered response shapes.
//!
//! Each [`SchemaTag`] names one typed reply. Validation deserializes the
//! reply into that type and then runs its semantic checks, so "conforms to
//! the schema" means "parses into the Rust type and passes `check`".

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaTag {
    SceneSplit,
    SceneDetail,
    Explanation,
    Dedup,
    ChapterSummary,
    Interaction,
    CharacterProfile,
    LocationProfile,
    ThemeColors,
    BoundaryLabels,
    AskStory,
    AskText,
    TraitRank,
    ColorCategories,
}

/// A typed reply bound to its schema tag.
pub trait ResponseSchema: DeserializeOwned {
    const TAG: SchemaTag;

    /// Semantic checks beyond the JSON shape.
    fn check(&self) -> Result<(), String> {
        Ok(())
    }
}

fn validate_as<T: ResponseSchema>(value: &Value) -> Result<(), String> {
    let typed: T = T::deserialize(value).map_err(|e| e.to_string())?;
    typed.check()
}

fn finite(name: &str, x: f64) -> Result<(), String> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be a finite number"))
    }
}

fn non_empty(name: &str, s: &str) -> Result<(), String> {
    if s.trim().is_empty() {
        Err(format!("{name} must not be empty"))
    } else {
        Ok(())
    }
}

impl SchemaTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaTag::SceneSplit => "scene_split",
            SchemaTag::SceneDetail => "scene_detail",
            SchemaTag::Explanation => "explanation",
            SchemaTag::Dedup => "dedup",
            SchemaTag::ChapterSummary => "chapter_summary",
            SchemaTag::Interaction => "interaction",
            SchemaTag::CharacterProfile => "character_profile",
            SchemaTag::LocationProfile => "location_profile",
            SchemaTag::ThemeColors => "theme_colors",
            SchemaTag::BoundaryLabels => "boundary_labels",
            SchemaTag::AskStory => "ask_story",
            SchemaTag::AskText => "ask_text",
            SchemaTag::TraitRank => "trait_rank",
            SchemaTag::ColorCategories => "color_categories",
        }
    }

    /// Checks a parsed reply against this schema.
    pub fn validate(self, value: &Value) -> Result<(), String> {
        match self {
            SchemaTag::SceneSplit => validate_as::<SceneSplit>(value),
            SchemaTag::SceneDetail => validate_as::<SceneDetail>(value),
            SchemaTag::Explanation => validate_as::<ExplanationReply>(value),
            SchemaTag::Dedup => validate_as::<DedupGroups>(value),
            SchemaTag::ChapterSummary => validate_as::<ChapterSummaryReply>(value),
            SchemaTag::Interaction => validate_as::<InteractionReply>(value),
            SchemaTag::CharacterProfile => validate_as::<CharacterProfile>(value),
            SchemaTag::LocationProfile => validate_as::<LocationProfile>(value),
            SchemaTag::ThemeColors => validate_as::<ThemeColors>(value),
            SchemaTag::BoundaryLabels => validate_as::<BoundaryLabels>(value),
            SchemaTag::AskStory => validate_as::<AskStoryReply>(value),
            SchemaTag::AskText => validate_as::<AskTextReply>(value),
            SchemaTag::TraitRank => validate_as::<TraitRankReply>(value),
            SchemaTag::ColorCategories => validate_as::<ColorCategoriesReply>(value),
        }
    }

    /// JSON skeleton shown to the model in prompts.
    pub fn shape_hint(self) -> &'static str {
        match self {
            SchemaTag::SceneSplit => {
                r#"{"scenes": [{"title": str, "summary": str, "start_line": int, "end_line": int, "location": str, "boundary_explanation": str}]}"#
            }
            SchemaTag::SceneDetail => {
                r#"{"importance": num, "conflict": num, "sentiment": num, "importance_explanation": str, "entities": [{"name": str, "importance": num, "sentiment": num, "emotion": str, "quote": str}]}"#
            }
            SchemaTag::Explanation => r#"{"explanation": str}"#,
            SchemaTag::Dedup => r#"{"groups": [[str, ...], ...]}"#,
            SchemaTag::ChapterSummary => {
                r#"{"summary": str, "importance": num, "conflict": num, "sentiment": num}"#
            }
            SchemaTag::Interaction => r#"{"summary": str}"#,
            SchemaTag::CharacterProfile => {
                r##"{"quote": str, "group": str, "color": "#RRGGBB", "color_explanation": str}"##
            }
            SchemaTag::LocationProfile => r#"{"quote": str}"#,
            SchemaTag::ThemeColors => r##"{"themes": [{"name": str, "color": "#RRGGBB"}]}"##,
            SchemaTag::BoundaryLabels => r#"{"labels": [str, ...]}"#,
            SchemaTag::AskStory => r#"{"chapter_index": int, "explanation": str}"#,
            SchemaTag::AskText => r#"{"answer": str}"#,
            SchemaTag::TraitRank => r#"{"ranked": [{"entity": str, "justification": str}]}"#,
            SchemaTag::ColorCategories => {
                r##"{"categories": [{"label": str, "color": "#RRGGBB"}], "assignments": [{"entity": str, "label": str, "explanation": str}]}"##
            }
        }
    }
}

/// Pulls the JSON object out of a reply that may be wrapped in prose or a
/// Markdown code fence.
pub fn extract_json(raw: &str) -> Result<Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    match (trimmed.find('{'), trimmed.rfind('}')) {
        (Some(start), Some(end)) if start < end => serde_json::from_str(&trimmed[start..=end])
            .map_err(|e| format!("reply is not valid JSON: {e}")),
        _ => Err("reply contains no JSON object".to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpan {
    pub title: String,
    #[serde(default)]
    pub summary: String,
    /// 1-based, inclusive.
    pub start_line: i64,
    /// 1-based, inclusive.
    pub end_line: i64,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub boundary_explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSplit {
    pub scenes: Vec<SceneSpan>,
}

impl ResponseSchema for SceneSplit {
    const TAG: SchemaTag = SchemaTag::SceneSplit;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityReply {
    pub name: String,
    #[serde(default)]
    pub importance: Option<f64>,
    pub sentiment: f64,
    #[serde(default)]
    pub emotion: Option<String>,
    #[serde(default)]
    pub quote: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDetail {
    pub importance: f64,
    pub conflict: f64,
    pub sentiment: f64,
    #[serde(default)]
    pub importance_explanation: String,
    #[serde(default)]
    pub entities: Vec<EntityReply>,
}

impl ResponseSchema for SceneDetail {
    const TAG: SchemaTag = SchemaTag::SceneDetail;

    fn check(&self) -> Result<(), String> {
        finite("importance", self.importance)?;
        finite("conflict", self.conflict)?;
        finite("sentiment", self.sentiment)?;
        for e in &self.entities {
            non_empty("entity name", &e.name)?;
            finite("entity sentiment", e.sentiment)?;
            if let Some(i) = e.importance {
                finite("entity importance", i)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReply {
    pub explanation: String,
}

impl ResponseSchema for ExplanationReply {
    const TAG: SchemaTag = SchemaTag::Explanation;

    fn check(&self) -> Result<(), String> {
        non_empty("explanation", &self.explanation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupGroups {
    pub groups: Vec<Vec<String>>,
}

impl ResponseSchema for DedupGroups {
    const TAG: SchemaTag = SchemaTag::Dedup;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapterSummaryReply {
    pub summary: String,
    pub importance: f64,
    pub conflict: f64,
    pub sentiment: f64,
}

impl ResponseSchema for ChapterSummaryReply {
    const TAG: SchemaTag = SchemaTag::ChapterSummary;

    fn check(&self) -> Result<(), String> {
        finite("importance", self.importance)?;
        finite("conflict", self.conflict)?;
        finite("sentiment", self.sentiment)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionReply {
    pub summary: String,
}

impl ResponseSchema for InteractionReply {
    const TAG: SchemaTag = SchemaTag::Interaction;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterProfile {
    #[serde(default)]
    pub quote: Option<String>,
    pub group: String,
    pub color: String,
    #[serde(default)]
    pub color_explanation: String,
}

impl ResponseSchema for CharacterProfile {
    const TAG: SchemaTag = SchemaTag::CharacterProfile;

    fn check(&self) -> Result<(), String> {
        non_empty("group", &self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationProfile {
    #[serde(default)]
    pub quote: Option<String>,
}

impl ResponseSchema for LocationProfile {
    const TAG: SchemaTag = SchemaTag::LocationProfile;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeColor {
    pub name: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeColors {
    pub themes: Vec<ThemeColor>,
}

impl ResponseSchema for ThemeColors {
    const TAG: SchemaTag = SchemaTag::ThemeColors;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLabels {
    pub labels: Vec<String>,
}

impl ResponseSchema for BoundaryLabels {
    const TAG: SchemaTag = SchemaTag::BoundaryLabels;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskStoryReply {
    pub chapter_index: i64,
    pub explanation: String,
}

impl ResponseSchema for AskStoryReply {
    const TAG: SchemaTag = SchemaTag::AskStory;

    fn check(&self) -> Result<(), String> {
        non_empty("explanation", &self.explanation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskTextReply {
    pub answer: String,
}

impl ResponseSchema for AskTextReply {
    const TAG: SchemaTag = SchemaTag::AskText;

    fn check(&self) -> Result<(), String> {
        non_empty("answer", &self.answer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub entity: String,
    #[serde(default)]
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRankReply {
    pub ranked: Vec<RankedEntity>,
}

impl ResponseSchema for TraitRankReply {
    const TAG: SchemaTag = SchemaTag::TraitRank;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReply {
    pub label: String,
    #[serde(default)]
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentReply {
    pub entity: String,
    pub label: String,
    #[serde(default)]
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorCategoriesReply {
    pub categories: Vec<CategoryReply>,
    #[serde(default)]
    pub assignments: Vec<AssignmentReply>,
}

impl ResponseSchema for ColorCategoriesReply {
    const TAG: SchemaTag = SchemaTag::ColorCategories;

    fn check(&self) -> Result<(), String> {
        if self.categories.is_empty() {
            return Err("at least one category is required".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn extracts_fenced_json() {
        let v = extract_json("Sure!\n```json\n{\"answer\": \"yes\"}\n```").unwrap();
        assert_eq!(v, json!({"answer": "yes"}));
        assert!(extract_json("no json here").is_err());
    }

    #[test]
    fn validation_runs_semantic_checks() {
        assert!(SchemaTag::AskText.validate(&json!({"answer": "x"})).is_ok());
        assert!(SchemaTag::AskText.validate(&json!({"answer": " "})).is_err());
        assert!(SchemaTag::AskText.validate(&json!({"reply": "x"})).is_err());
        assert!(SchemaTag::SceneSplit
            .validate(&json!({"scenes": [{"title": "a", "start_line": 1, "end_line": 3}]}))
            .is_ok());
    }
}
