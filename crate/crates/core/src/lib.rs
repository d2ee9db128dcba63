//! Turns raw story text into structured narrative data for ribbon
//! visualizations: chapters, scenes, characters, locations and themes, with
//! every quote checked against the source text.

pub mod analytics;
pub mod ingest;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod store;
pub mod text;

// The guide's snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/story-file.md")]
    mod story_file {}
    #[doc = include_str!("../../../book/src/ingestion.md")]
    mod ingestion {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/quotes.md")]
    mod quotes {}
    #[doc = include_str!("../../../book/src/aliases.md")]
    mod aliases {}
    #[doc = include_str!("../../../book/src/gateway.md")]
    mod gateway {}
    #[doc = include_str!("../../../book/src/analytics.md")]
    mod analytics {}
}
