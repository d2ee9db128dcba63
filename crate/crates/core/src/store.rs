//! Flat-file story store.
//!
//! ```text
//! <data_dir>/<story_id>/config.json
//! <data_dir>/<story_id>/chapters.json
//! <data_dir>/<story_id>/chapters/<index>.txt
//! <data_dir>/<story_id>/story.json
//! <data_dir>/<story_id>/provenance.json
//! <data_dir>/<story_id>/cache/
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, IngestError, StoryConfig, StoryText};
use crate::model::serial::{self, SerialError};
use crate::model::{Chapter, ProvenanceLog, StoryData};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Serial {
        path: PathBuf,
        #[source]
        source: SerialError,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Contents of `chapters.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChapterIndex {
    /// Lines of the stripped story body, including any discarded preamble.
    pub line_count: usize,
    pub chapters: Vec<Chapter>,
}

#[derive(Debug, Clone)]
pub struct StoryStore {
    root: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_ingested_at(
    story_dir: &Path,
    text: &StoryText,
    chapters: &[Chapter],
) -> Result<ChapterIndex, StoreError> {
    let dir = story_dir.join("chapters");
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for ch in chapters {
        let body = text.slice(ch.line_start, ch.line_end);
        write_atomic(&dir.join(format!("{}.txt", ch.index)), body.as_bytes())?;
    }
    let index = ChapterIndex {
        line_count: text.line_count(),
        chapters: chapters.to_vec(),
    };
    let path = story_dir.join("chapters.json");
    let json = serial::to_canonical_string(&index).map_err(|source| StoreError::Serial {
        path: path.clone(),
        source,
    })?;
    write_atomic(&path, json.as_bytes())?;
    Ok(index)
}

impl StoryStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        StoryStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn story_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn config_path(&self, id: &str) -> PathBuf {
        self.story_dir(id).join("config.json")
    }

    pub fn story_path(&self, id: &str) -> PathBuf {
        self.story_dir(id).join("story.json")
    }

    pub fn provenance_path(&self, id: &str) -> PathBuf {
        self.story_dir(id).join("provenance.json")
    }

    pub fn chapter_index_path(&self, id: &str) -> PathBuf {
        self.story_dir(id).join("chapters.json")
    }

    pub fn chapter_text_path(&self, id: &str, index: usize) -> PathBuf {
        self.story_dir(id).join("chapters").join(format!("{index}.txt"))
    }

    pub fn cache_dir(&self, id: &str) -> PathBuf {
        self.story_dir(id).join("cache")
    }

    pub fn read_config(&self, id: &str) -> Result<StoryConfig, StoreError> {
        Ok(StoryConfig::load(&self.config_path(id))?)
    }

    /// Writes chapter texts and `chapters.json` for an ingested story.
    pub fn write_ingested(
        &self,
        id: &str,
        text: &StoryText,
        chapters: &[Chapter],
    ) -> Result<ChapterIndex, StoreError> {
        write_ingested_at(&self.story_dir(id), text, chapters)
    }

    /// Runs ingestion for a config file whose `source` is a local path
    /// (resolved against the config's directory). Output goes next to the
    /// config file.
    pub fn ingest_local(config_path: &Path) -> Result<(StoryConfig, ChapterIndex), StoreError> {
        let config = StoryConfig::load(config_path)?;
        let story_dir = config_path.parent().unwrap_or(Path::new("."));
        let text = ingest::load_text(&story_dir.join(&config.source), &config)?;
        let chapters = ingest::split_chapters(&text, &config)?;
        let index = write_ingested_at(story_dir, &text, &chapters)?;
        Ok((config, index))
    }

    pub fn read_chapter_index(&self, id: &str) -> Result<ChapterIndex, StoreError> {
        let path = self.chapter_index_path(id);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Format {
            path,
            message: e.to_string(),
        })
    }

    pub fn read_chapter_text(&self, id: &str, index: usize) -> Result<String, StoreError> {
        let path = self.chapter_text_path(id, index);
        fs::read_to_string(&path).map_err(io_err(&path))
    }

    pub fn read_chapter_texts(&self, id: &str, count: usize) -> Result<Vec<String>, StoreError> {
        (0..count).map(|i| self.read_chapter_text(id, i)).collect()
    }

    pub fn read_story_bytes(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.story_path(id);
        fs::read(&path).map_err(io_err(&path))
    }

    pub fn read_story(&self, id: &str) -> Result<StoryData, StoreError> {
        let path = self.story_path(id);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        serial::deserialize(&bytes).map_err(|source| StoreError::Serial { path, source })
    }

    /// Writes `story.json` (timings removed) and `provenance.json` (full log).
    pub fn write_story(&self, story: &StoryData) -> Result<(), StoreError> {
        let id = &story.meta.id;
        let mut stable = story.clone();
        stable.pipeline_log.timings.clear();
        let path = self.story_path(id);
        let bytes = serial::serialize(&stable).map_err(|source| StoreError::Serial {
            path: path.clone(),
            source,
        })?;
        write_atomic(&path, &bytes)?;
        self.write_provenance(id, &story.pipeline_log)
    }

    pub fn write_provenance(&self, id: &str, log: &ProvenanceLog) -> Result<(), StoreError> {
        let path = self.provenance_path(id);
        let json = serial::to_canonical_string(log).map_err(|source| StoreError::Serial {
            path: path.clone(),
            source,
        })?;
        write_atomic(&path, json.as_bytes())
    }

    /// Ids of every story directory that holds a `story.json`, sorted.
    pub fn list_story_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        let entries = fs::read_dir(&self.root).map_err(io_err(&self.root))?;
        for entry in entries {
            let entry = entry.map_err(io_err(&self.root))?;
            let path = entry.path();
            if path.join("story.json").is_file() {
                if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
