//! Offline playback of canned replies keyed by request tag.
//!
//! A request tagged `scene_split/ch0` is answered from
//! `<dir>/scene_split/ch0.json`. On attempt `n > 1` the provider first looks
//! for `<dir>/scene_split/ch0@n.json`, which lets a fixture script a reply
//! that only becomes valid after a re-prompt. A missing fixture is a hard
//! error so prompt/tag drift is caught immediately.

use std::path::{Path, PathBuf};

use super::{LlmProvider, LlmRequest, ProviderError};

#[derive(Debug, Clone)]
pub struct FixtureProvider {
    dir: PathBuf,
}

impl FixtureProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureProvider { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of the fixture answering `tag` on `attempt`, before any fallback.
    pub fn fixture_path(&self, tag: &str, attempt: u32) -> Result<PathBuf, ProviderError> {
        if !is_safe_tag(tag) {
            return Err(ProviderError::Rejected(format!(
                "tag {tag:?} cannot be mapped to a fixture path"
            )));
        }
        let name = if attempt > 1 {
            format!("{tag}@{attempt}.json")
        } else {
            format!("{tag}.json")
        };
        Ok(self.dir.join(name))
    }
}

/// Tags are relative paths made of `[a-z0-9_.+-]` segments.
pub fn is_safe_tag(tag: &str) -> bool {
    !tag.is_empty()
        && tag.split('/').all(|seg| {
            !seg.is_empty()
                && seg != "."
                && seg != ".."
                && seg.bytes().all(|b| {
                    b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'_' | b'-' | b'.' | b'+')
                })
        })
}

#[async_trait::async_trait]
impl LlmProvider for FixtureProvider {
    fn model_id(&self) -> String {
        "fixture".to_string()
    }

    async fn send(&self, request: &LlmRequest, attempt: u32) -> Result<String, ProviderError> {
        if attempt > 1 {
            let scripted = self.fixture_path(&request.tag, attempt)?;
            if let Ok(text) = tokio::fs::read_to_string(&scripted).await {
                return Ok(text);
            }
        }
        let path = self.fixture_path(&request.tag, 1)?;
        match tokio::fs::read_to_string(&path).await {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(ProviderError::MissingFixture(request.tag.clone()))
            }
            Err(e) => Err(ProviderError::Transport(format!("{}: {e}", path.display()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_safety() {
        assert!(is_safe_tag("scene_split/ch0"));
        assert!(is_safe_tag("interaction/ch1/anna+bert"));
        assert!(!is_safe_tag("../etc/passwd"));
        assert!(!is_safe_tag("a//b"));
        assert!(!is_safe_tag("Upper"));
        assert!(!is_safe_tag(""));
    }
}
