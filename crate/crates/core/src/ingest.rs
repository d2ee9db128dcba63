//! Raw text ingestion: boilerplate stripping, chapter splitting, line numbering.
//!
//! Chapter boundaries come from a user-supplied marker regex rather than a
//! model. Each line matching the marker opens a chapter and becomes its
//! title; text before the first marker is discarded with a warning.

use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Chapter, Genre, StoryMeta};

const START_SENTINEL: &str = "*** START OF";
const END_SENTINEL: &str = "*** END OF";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fetching {url} failed: {message}")]
    Fetch { url: String, message: String },
    #[error("sentinels not found: expected lines starting with {START_SENTINEL:?} and {END_SENTINEL:?}")]
    SentinelsNotFound,
    #[error("anchor {0:?} not found in text")]
    AnchorNotFound(String),
    #[error("front_matter_end anchor must precede back_matter_start anchor")]
    AnchorOrder,
    #[error("story body is empty after stripping")]
    EmptyBody,
    #[error("chapter marker does not compile: {0}")]
    BadMarker(#[from] regex::Error),
    #[error("chapter marker matched no lines; heading-like candidates: {suggestions:?}")]
    NoChapters { suggestions: Vec<String> },
    #[error("invalid config: {0}")]
    Config(String),
}

/// Per-story ingestion settings, stored as `config.json` in the story directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryConfig {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub author: String,
    pub genre: Genre,
    /// Path (relative to the config file) or `http(s)://` URL.
    pub source: String,
    pub chapter_marker: String,
    #[serde(default)]
    pub strip_boilerplate: bool,
    #[serde(default)]
    pub front_matter_end: Option<String>,
    #[serde(default)]
    pub back_matter_start: Option<String>,
}

impl StoryConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, IngestError> {
        let config: StoryConfig =
            serde_json::from_slice(bytes).map_err(|e| IngestError::Config(e.to_string()))?;
        if config.id.is_empty()
            || !config
                .id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        {
            return Err(IngestError::Config(format!(
                "id {:?} must match [a-z0-9-]+",
                config.id
            )));
        }
        Regex::new(&config.chapter_marker)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&bytes)
    }

    pub fn meta(&self, line_count: usize) -> StoryMeta {
        StoryMeta {
            id: self.id.clone(),
            title: self.title.clone(),
            author: self.author.clone(),
            genre: self.genre,
            source: self.source.clone(),
            line_count,
        }
    }

    pub fn is_url(&self) -> bool {
        self.source.starts_with("http://") || self.source.starts_with("https://")
    }
}

/// Normalized story body: LF line endings, no trailing whitespace, boilerplate removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoryText {
    pub lines: Vec<String>,
}

impl StoryText {
    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// Text of lines `[start, end)` joined with `\n`, with a trailing newline.
    pub fn slice(&self, start: usize, end: usize) -> String {
        let mut out = self.lines[start..end].join("\n");
        out.push('\n');
        out
    }
}

/// Reads a local source file and normalizes it.
pub fn load_text(path: &Path, config: &StoryConfig) -> Result<StoryText, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    normalize_text(&bytes, config)
}

/// Downloads a source over HTTP and normalizes it.
pub async fn fetch_text(url: &str, config: &StoryConfig) -> Result<StoryText, IngestError> {
    let fetch_err = |e: reqwest::Error| IngestError::Fetch {
        url: url.to_string(),
        message: e.to_string(),
    };
    let resp = reqwest::get(url).await.map_err(fetch_err)?;
    let resp = resp.error_for_status().map_err(fetch_err)?;
    let bytes = resp.bytes().await.map_err(fetch_err)?;
    normalize_text(&bytes, config)
}

/// Decodes (lossily), normalizes line endings and trailing whitespace, then
/// strips Gutenberg sentinels and optional anchors.
pub fn normalize_text(bytes: &[u8], config: &StoryConfig) -> Result<StoryText, IngestError> {
    let decoded = String::from_utf8_lossy(bytes);
    if let std::borrow::Cow::Owned(_) = decoded {
        tracing::warn!(story = %config.id, "source is not valid UTF-8; invalid bytes replaced");
    }
    let decoded = decoded.strip_prefix('\u{feff}').unwrap_or(&decoded);
    let mut lines: Vec<String> = decoded
        .split('\n')
        .map(|l| l.trim_end().to_string())
        .collect();
    // A final newline does not open another line.
    if decoded.ends_with('\n') {
        lines.pop();
    }

    if config.strip_boilerplate {
        let start = lines.iter().position(|l| l.starts_with(START_SENTINEL));
        let end = lines.iter().rposition(|l| l.starts_with(END_SENTINEL));
        match (start, end) {
            (Some(s), Some(e)) if s < e => {
                lines.truncate(e);
                lines.drain(..=s);
            }
            _ => return Err(IngestError::SentinelsNotFound),
        }
    }

    let front = match &config.front_matter_end {
        Some(anchor) => Some(
            lines
                .iter()
                .position(|l| l.contains(anchor.as_str()))
                .ok_or_else(|| IngestError::AnchorNotFound(anchor.clone()))?,
        ),
        None => None,
    };
    let back = match &config.back_matter_start {
        Some(anchor) => Some(
            lines
                .iter()
                .rposition(|l| l.contains(anchor.as_str()))
                .ok_or_else(|| IngestError::AnchorNotFound(anchor.clone()))?,
        ),
        None => None,
    };
    if let (Some(f), Some(b)) = (front, back) {
        if f >= b {
            return Err(IngestError::AnchorOrder);
        }
    }
    if let Some(b) = back {
        lines.truncate(b);
    }
    if let Some(f) = front {
        lines.drain(..=f);
    }

    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(IngestError::EmptyBody);
    }
    Ok(StoryText { lines })
}

fn heading_candidates(text: &StoryText) -> Vec<String> {
    let heading = Regex::new(r"(?i)^\s*(chapter|act|book|part|canto)\b|^\s*[IVXLC]+\.?\s*$")
        .expect("static regex");
    text.lines
        .iter()
        .filter(|l| heading.is_match(l))
        .take(5)
        .cloned()
        .collect()
}

/// Splits the body into chapters at marker lines.
///
/// A marker whose chapter has no non-blank content (table-of-contents
/// entries, doubled headings) is folded into the preamble if it precedes
/// the first real chapter, otherwise into the previous chapter.
pub fn split_chapters(text: &StoryText, config: &StoryConfig) -> Result<Vec<Chapter>, IngestError> {
    let marker = Regex::new(&config.chapter_marker)?;
    let starts: Vec<usize> = text
        .lines
        .iter()
        .enumerate()
        .filter(|(_, l)| marker.is_match(l))
        .map(|(i, _)| i)
        .collect();
    if starts.is_empty() {
        return Err(IngestError::NoChapters {
            suggestions: heading_candidates(text),
        });
    }

    let mut chapters: Vec<Chapter> = Vec::new();
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(text.line_count());
        let has_body = text.lines[start + 1..end].iter().any(|l| !l.trim().is_empty());
        let title = text.lines[start].trim().to_string();
        if !has_body {
            match chapters.last_mut() {
                Some(prev) => {
                    tracing::warn!(story = %config.id, heading = %title, "empty chapter merged into previous");
                    prev.line_end = end;
                }
                None => {
                    tracing::warn!(story = %config.id, heading = %title, "empty chapter before first chapter discarded");
                }
            }
            continue;
        }
        chapters.push(Chapter {
            index: chapters.len(),
            title,
            line_start: start,
            line_end: end,
        });
    }
    match chapters.first() {
        None => Err(IngestError::NoChapters {
            suggestions: heading_candidates(text),
        }),
        Some(first) => {
            if first.line_start > 0 {
                tracing::warn!(
                    story = %config.id,
                    lines = first.line_start,
                    "discarding text before the first chapter marker"
                );
            }
            Ok(chapters)
        }
    }
}

/// 1-based chapter-local line numbering. Blank lines are kept.
pub fn number_lines<'a>(chapter: &Chapter, text: &'a StoryText) -> Vec<(usize, &'a str)> {
    assert!(chapter.line_end <= text.line_count() && chapter.line_start < chapter.line_end);
    text.lines[chapter.line_start..chapter.line_end]
        .iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l.as_str()))
        .collect()
}

/// Same numbering applied to an already extracted chapter text.
pub fn number_chapter_text(chapter_text: &str) -> String {
    chapter_text
        .lines()
        .enumerate()
        .map(|(i, l)| format!("{}: {l}\n", i + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(marker: &str, strip: bool) -> StoryConfig {
        StoryConfig {
            id: "t".into(),
            title: "T".into(),
            author: String::new(),
            genre: Genre::Novel,
            source: "source.txt".into(),
            chapter_marker: marker.into(),
            strip_boilerplate: strip,
            front_matter_end: None,
            back_matter_start: None,
        }
    }

    #[test]
    fn strips_gutenberg_header_and_footer() {
        let raw = "Title page\n*** START OF THE PROJECT GUTENBERG EBOOK X ***\nCHAPTER I\nbody\n*** END OF THE PROJECT GUTENBERG EBOOK X ***\nlicense\n";
        let text = normalize_text(raw.as_bytes(), &config("^CHAPTER", true)).unwrap();
        assert_eq!(text.lines, vec!["CHAPTER I", "body"]);
    }

    #[test]
    fn crlf_becomes_lf_with_same_line_count() {
        let raw = "CHAPTER I  \r\nalpha\r\n\r\nbeta\r\n";
        let text = normalize_text(raw.as_bytes(), &config("^CHAPTER", false)).unwrap();
        assert_eq!(text.lines, vec!["CHAPTER I", "alpha", "", "beta"]);
        assert_eq!(text.line_count(), raw.matches('\n').count());
    }

    #[test]
    fn missing_sentinels_is_an_error() {
        let err = normalize_text(b"CHAPTER I\nbody\n", &config("^CHAPTER", true)).unwrap_err();
        assert!(matches!(err, IngestError::SentinelsNotFound));
        assert!(err.to_string().contains("sentinels not found"));
    }

    #[test]
    fn invalid_utf8_is_replaced() {
        let text = normalize_text(b"CHAPTER I\nca\xfff\n", &config("^CHAPTER", false)).unwrap();
        assert_eq!(text.lines[1], "ca\u{fffd}f");
    }

    #[test]
    fn anchors_trim_front_and_back_matter() {
        let mut cfg = config("^CHAPTER", false);
        cfg.front_matter_end = Some("CONTENTS END".into());
        cfg.back_matter_start = Some("THE END".into());
        let raw = "junk\nCONTENTS END\nCHAPTER I\nbody\nTHE END\nnotes\n";
        let text = normalize_text(raw.as_bytes(), &cfg).unwrap();
        assert_eq!(text.lines, vec!["CHAPTER I", "body"]);

        cfg.front_matter_end = Some("THE END".into());
        cfg.back_matter_start = Some("CONTENTS END".into());
        assert!(matches!(
            normalize_text(raw.as_bytes(), &cfg),
            Err(IngestError::AnchorOrder)
        ));
    }

    #[test]
    fn two_roman_chapters() {
        let cfg = config("^CHAPTER [IVX]+", false);
        let text = normalize_text(b"CHAPTER I\naaa\nCHAPTER II\nbbb", &cfg).unwrap();
        let chapters = split_chapters(&text, &cfg).unwrap();
        let titles: Vec<_> = chapters.iter().map(|c| c.title.as_str()).collect();
        assert_eq!(titles, ["CHAPTER I", "CHAPTER II"]);
        assert_eq!((chapters[0].line_start, chapters[0].line_end), (0, 2));
        assert_eq!((chapters[1].line_start, chapters[1].line_end), (2, 4));
    }

    #[test]
    fn no_marker_lists_suggestions() {
        let cfg = config("^CHAPTER [IVX]+$", false);
        let text = normalize_text(b"Chapter one\ntext\nACT II\nmore\nBook 3\n", &cfg).unwrap();
        match split_chapters(&text, &cfg) {
            Err(IngestError::NoChapters { suggestions }) => {
                assert_eq!(suggestions, ["Chapter one", "ACT II", "Book 3"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn toc_entries_are_folded_away() {
        let cfg = config("^CHAPTER [IVX]+$", false);
        let raw = "Contents\nCHAPTER I\nCHAPTER II\n\nCHAPTER I\none\nCHAPTER II\n\nCHAPTER III\nthree\n";
        let text = normalize_text(raw.as_bytes(), &cfg).unwrap();
        let chapters = split_chapters(&text, &cfg).unwrap();
        assert_eq!(chapters.len(), 2);
        assert_eq!(chapters[0].line_start, 4);
        // the empty CHAPTER II body belongs to chapter I
        assert_eq!(chapters[0].line_end, 8);
        assert_eq!(chapters[1].title, "CHAPTER III");
        assert_eq!(chapters[1].line_end, text.line_count());
    }

    #[test]
    fn numbering_is_one_based_and_keeps_blanks() {
        let cfg = config("^CHAPTER", false);
        let text = normalize_text(b"CHAPTER I\n\nlast\n", &cfg).unwrap();
        let chapters = split_chapters(&text, &cfg).unwrap();
        let numbered = number_lines(&chapters[0], &text);
        assert_eq!(numbered, vec![(1, "CHAPTER I"), (2, ""), (3, "last")]);
        assert_eq!(number_chapter_text("a\n\nb\n"), "1: a\n2: \n3: b\n");
    }
}
