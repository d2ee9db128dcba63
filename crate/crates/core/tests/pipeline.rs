use std::path::{Path, PathBuf};
use std::sync::Arc;

use ribbons_core::llm::{FixtureProvider, Gateway, GatewayConfig};
use ribbons_core::model::{self, serialize};
use ribbons_core::pipeline::{run_pipeline, PipelineConfig, PipelineError, StoryInput};
use ribbons_core::store::StoryStore;

const STORY: &str = "lantern-keeper";

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn input() -> StoryInput {
    StoryInput::load(&StoryStore::new(repo().join("data")), STORY).unwrap()
}

fn gateway(fixtures: &Path) -> Gateway {
    Gateway::single(Arc::new(FixtureProvider::new(fixtures)), GatewayConfig::default())
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Fixture tree with `scene_split/ch1` removed.
fn broken_fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&repo().join("fixtures").join(STORY), dir.path());
    std::fs::remove_file(dir.path().join("scene_split/ch1.json")).unwrap();
    dir
}

#[tokio::test]
async fn fixture_run_reproduces_golden_bytes() {
    let input = input();
    let mut story = run_pipeline(&gateway(&repo().join("fixtures").join(STORY)), &input, &PipelineConfig::default())
        .await
        .unwrap();
    assert!(model::validate(&story, &input.texts).is_empty());
    assert!(!story.pipeline_log.timings.is_empty());
    story.pipeline_log.timings.clear();
    let golden = std::fs::read(repo().join("data").join(STORY).join("story.json")).unwrap();
    assert_eq!(serialize(&story).unwrap(), golden);
}

#[tokio::test]
async fn failed_chapter_aborts_the_run() {
    let fixtures = broken_fixtures();
    let err = run_pipeline(&gateway(fixtures.path()), &input(), &PipelineConfig::default())
        .await
        .unwrap_err();
    match err {
        PipelineError::ChaptersFailed(f) => {
            assert_eq!(f.len(), 1, "{f:?}");
            assert!(f[0].starts_with("chapter 1"), "{f:?}");
        }
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn allow_partial_keeps_failed_chapter_as_one_flagged_scene() {
    let fixtures = broken_fixtures();
    let input = input();
    let config = PipelineConfig {
        allow_partial: true,
        ..PipelineConfig::default()
    };
    let story = run_pipeline(&gateway(fixtures.path()), &input, &config).await.unwrap();
    let ch1: Vec<_> = story.scenes.iter().filter(|s| s.chapter_index == 1).collect();
    assert_eq!(ch1.len(), 1);
    assert_eq!(ch1[0].line_start, 0);
    assert_eq!(ch1[0].line_end, story.chapters[1].line_count());
    assert!(story.pipeline_log.flags.iter().any(|f| f.step == "segment/ch1"));
    assert!(model::validate(&story, &input.texts).is_empty());
}
