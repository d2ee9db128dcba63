//! Corpus statistics over finished story data.

use std::fmt;

use serde::Serialize;

use crate::model::{EvidenceVariant, StoryData};

pub mod boundaries;

/// Headline counts for one story.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoryStats {
    pub id: String,
    pub title: String,
    pub lines: usize,
    pub chapters: usize,
    pub scenes: usize,
    pub characters: usize,
    pub locations: usize,
    pub themes: usize,
    /// Verified quotes stored anywhere in the story.
    pub quotes: usize,
}

impl StoryStats {
    pub const HEADERS: [&'static str; 8] =
        ["story", "lines", "chapters", "scenes", "characters", "locations", "themes", "quotes"];

    pub fn row(&self) -> [String; 8] {
        [
            self.title.clone(),
            self.lines.to_string(),
            self.chapters.to_string(),
            self.scenes.to_string(),
            self.characters.to_string(),
            self.locations.to_string(),
            self.themes.to_string(),
            self.quotes.to_string(),
        ]
    }
}

pub fn story_stats(story: &StoryData) -> StoryStats {
    let is_quote = |v: EvidenceVariant| v == EvidenceVariant::Quote;
    let quotes = story
        .scenes
        .iter()
        .flat_map(|s| &s.appearances)
        .filter(|a| is_quote(a.evidence.variant))
        .count()
        + story
            .characters
            .iter()
            .filter(|c| is_quote(c.representative_quote.variant))
            .count()
        + story
            .locations
            .iter()
            .filter(|l| is_quote(l.representative_quote.variant))
            .count();
    StoryStats {
        id: story.meta.id.clone(),
        title: story.meta.title.clone(),
        lines: story.meta.line_count,
        chapters: story.chapters.len(),
        scenes: story.scenes.len(),
        characters: story.characters.len(),
        locations: story.locations.len(),
        themes: story.themes.len(),
        quotes,
    }
}

/// Share of checked quote candidates that survived: `1 - replaced / checked`.
/// `None` when nothing was checked.
///
/// ```
/// use ribbons_core::analytics::{quote_accuracy, Accuracy};
/// assert_eq!(Accuracy(quote_accuracy(100, 3)).to_string(), "0.9700");
/// assert_eq!(Accuracy(quote_accuracy(0, 0)).to_string(), "n/a");
/// ```
pub fn quote_accuracy(checked: usize, replaced: usize) -> Option<f64> {
    (checked > 0).then(|| 1.0 - replaced as f64 / checked as f64)
}

/// Display wrapper: four decimals, or `n/a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy(pub Option<f64>);

impl fmt::Display for Accuracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(a) => write!(f, "{a:.4}"),
            None => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneLengthStats {
    /// Mean scene length in lines, one decimal.
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    /// `(bin_start, count)` for bins `[bin_start, bin_start + 10)`.
    pub histogram: Vec<(usize, usize)>,
}

pub const HISTOGRAM_BIN: usize = 10;

pub fn scene_length_stats(story: &StoryData) -> Option<SceneLengthStats> {
    let lengths: Vec<usize> = story.scenes.iter().map(|s| s.line_count()).collect();
    let min = *lengths.iter().min()?;
    let max = *lengths.iter().max()?;
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    let mut histogram: Vec<(usize, usize)> = (0..=max / HISTOGRAM_BIN).map(|b| (b * HISTOGRAM_BIN, 0)).collect();
    for l in &lengths {
        histogram[l / HISTOGRAM_BIN].1 += 1;
    }
    Some(SceneLengthStats {
        mean: (mean * 10.0).round() / 10.0,
        min,
        max,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_edges() {
        assert_eq!(quote_accuracy(0, 0), None);
        assert_eq!(quote_accuracy(4, 0), Some(1.0));
        assert_eq!(quote_accuracy(4, 4), Some(0.0));
        assert_eq!(Accuracy(quote_accuracy(3, 1)).to_string(), "0.6667");
    }
}
