use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ribbons_core::ingest::{self, StoryConfig};
use ribbons_core::llm::live::ChatCompletionsProvider;
use ribbons_core::llm::{FixtureProvider, Gateway, GatewayConfig, LlmProvider, ModelRole};
use ribbons_core::model;
use ribbons_core::pipeline::{run_pipeline, PipelineConfig, PipelineError, StoryInput, Target};
use ribbons_core::store::{write_ingested_at, StoryStore};
use ribbons_service::{AppState, GatewaySource};

mod stats;

#[derive(Parser)]
#[command(name = "ribbons", version, about = "Turn novels into ribbon-chart story data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Provider {
    /// Chat-completions API configured through SR_* environment variables.
    Live,
    /// Canned replies from `<fixtures>/<story id>/`.
    Fixture,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(clap::Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "live")]
    provider: Provider,
    /// Root of the fixture tree used by `--provider fixture`.
    #[arg(long, default_value = "fixtures")]
    fixtures: PathBuf,
    /// Most model calls in flight at once.
    #[arg(long, default_value_t = 8)]
    concurrency: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a story's source text and split it into chapters.
    Ingest {
        /// The story's config.json; output is written next to it.
        #[arg(long)]
        config: PathBuf,
    },
    /// Extract scenes, entities and summaries into story.json.
    Run {
        #[arg(long)]
        story: String,
        #[arg(long, default_value = "both")]
        target: Target,
        /// Write whatever chapters succeeded instead of failing the run.
        #[arg(long)]
        allow_partial: bool,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Corpus statistics for one story or every story in the data directory.
    Stats {
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        story: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Check a stored story.json against every data-model invariant.
    Validate {
        #[arg(long)]
        story: String,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Serve stories and on-the-fly queries over HTTP on 127.0.0.1.
    Serve {
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 8787)]
        port: u16,
        /// Ignore cached query results (fresh results are still written).
        #[arg(long)]
        no_cache: bool,
        #[command(flatten)]
        model: ModelArgs,
    },
}

fn gateway_config(concurrency: usize) -> GatewayConfig {
    GatewayConfig {
        max_concurrency: concurrency.max(1),
        ..GatewayConfig::default()
    }
}

fn live_gateway(concurrency: usize) -> Result<Gateway> {
    let extraction = ChatCompletionsProvider::from_env(ModelRole::Extraction)
        .context("SR_API_KEY_EXTRACTION is not set; use --provider fixture for offline runs")?;
    let extraction: Arc<dyn LlmProvider> = Arc::new(extraction);
    let dedup: Arc<dyn LlmProvider> = match ChatCompletionsProvider::from_env(ModelRole::Dedup) {
        Some(p) => Arc::new(p),
        None => extraction.clone(),
    };
    Ok(Gateway::new(extraction, dedup, gateway_config(concurrency)))
}

fn fixture_gateway(root: &Path, id: &str, concurrency: usize) -> Gateway {
    Gateway::single(Arc::new(FixtureProvider::new(root.join(id))), gateway_config(concurrency))
}

async fn ingest(config_path: &Path) -> Result<()> {
    let config = StoryConfig::load(config_path)?;
    let (config, index) = if config.is_url() {
        let text = ingest::fetch_text(&config.source, &config).await?;
        let chapters = ingest::split_chapters(&text, &config)?;
        let dir = config_path.parent().unwrap_or(Path::new("."));
        (config, write_ingested_at(dir, &text, &chapters)?)
    } else {
        StoryStore::ingest_local(config_path)?
    };
    println!(
        "{}: {} lines, {} chapters",
        config.id,
        index.line_count,
        index.chapters.len()
    );
    for ch in &index.chapters {
        println!("  {:>3}  {:>6} lines  {}", ch.index, ch.line_count(), ch.title);
    }
    Ok(())
}

async fn run(
    story: &str,
    target: Target,
    allow_partial: bool,
    data_dir: &Path,
    model: &ModelArgs,
) -> Result<()> {
    let store = StoryStore::new(data_dir);
    let input = StoryInput::load(&store, story)?;
    let gateway = match model.provider {
        Provider::Live => live_gateway(model.concurrency)?,
        Provider::Fixture => fixture_gateway(&model.fixtures, story, model.concurrency),
    };
    let config = PipelineConfig {
        target,
        allow_partial,
        concurrency: model.concurrency.max(1),
    };
    match run_pipeline(&gateway, &input, &config).await {
        Ok(data) => {
            store.write_story(&data)?;
            let log = &data.pipeline_log;
            println!(
                "{}: {} scenes, {} characters, {} locations, {} themes; quotes checked {} replaced {}",
                story,
                data.scenes.len(),
                data.characters.len(),
                data.locations.len(),
                data.themes.len(),
                log.quotes_checked,
                log.quotes_replaced
            );
            println!("wrote {}", store.story_path(story).display());
            Ok(())
        }
        Err(PipelineError::Invalid { story: data, violations }) => {
            // keep the log so the failure can be inspected
            store.write_provenance(story, &data.pipeline_log)?;
            for v in &violations {
                eprintln!("{v}");
            }
            bail!("story failed validation with {} violation(s); story.json not written", violations.len())
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(story: &str, data_dir: &Path) -> Result<bool> {
    let store = StoryStore::new(data_dir);
    let data = store.read_story(story)?;
    let texts = store.read_chapter_texts(story, data.chapters.len())?;
    let violations = model::validate(&data, &texts);
    if violations.is_empty() {
        println!("{story}: ok");
        return Ok(true);
    }
    for v in &violations {
        println!("{v}");
    }
    println!("{story}: {} violation(s)", violations.len());
    Ok(false)
}

async fn serve(data_dir: PathBuf, port: u16, no_cache: bool, model: ModelArgs) -> Result<()> {
    let gateways: GatewaySource = match model.provider {
        Provider::Live => {
            let gateway = live_gateway(model.concurrency)?;
            Arc::new(move |_: &str| gateway.clone())
        }
        Provider::Fixture => {
            // one gateway per story so its in-flight limit is shared across requests
            let cache: Mutex<HashMap<String, Gateway>> = Mutex::default();
            let root = model.fixtures.clone();
            let limit = model.concurrency;
            Arc::new(move |id: &str| {
                cache
                    .lock()
                    .expect("gateway table poisoned")
                    .entry(id.to_string())
                    .or_insert_with(|| fixture_gateway(&root, id, limit))
                    .clone()
            })
        }
    };
    let state = Arc::new(AppState::new(StoryStore::new(data_dir), gateways, no_cache));
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    ribbons_service::serve(state, addr).await?;
    Ok(())
}

async fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ingest { config } => ingest(&config).await.map(|_| true),
        Command::Run {
            story,
            target,
            allow_partial,
            data_dir,
            model,
        } => run(&story, target, allow_partial, &data_dir, &model).await.map(|_| true),
        Command::Stats {
            story,
            all,
            format,
            data_dir,
        } => {
            let store = StoryStore::new(data_dir);
            let ids = if all { store.list_story_ids()? } else { story.into_iter().collect() };
            stats::print(&store, &ids, format).map(|_| true)
        }
        Command::Validate { story, data_dir } => validate(&story, &data_dir),
        Command::Serve {
            data_dir,
            port,
            no_cache,
            model,
        } => serve(data_dir, port, no_cache, model).await.map(|_| true),
    }
}

/// The error chain joined with `: `, skipping causes the previous message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            out = format!("{out}: {text}");
        }
    }
    out
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(Cli::parse()).await {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
