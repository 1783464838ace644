//! Operator CLI: `ingest | extract | embed | index | tune | eval | serve`.
//!
//! Exit codes: 0 success, 1 validation or processing failure, 2 missing
//! upstream artifact.

use std::ffi::OsString;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use devsearch::evaluation::{render_table, StdevKind};
use devsearch::extraction::{
    CompletionProvider, ExtractOptions, MockProvider, PromptedQueries, RetryPolicy, SimulatedQueryProvider,
};
use devsearch::tuning::TpeConfig;
use devsearch::{EmbeddingProvider, HashEmbedder, Variant};

use crate::api::{self, AppState, Loaded};
use crate::live::{LiveChat, LiveEmbedder};
use crate::pipeline::{self, StageError, StageResult, TuneOptions, Workspace};

#[derive(Debug, Parser)]
#[command(name = "devsearch", version, about = "Hybrid search over AI-device summaries")]
pub struct Cli {
    /// Work directory holding every pipeline artifact.
    #[arg(long, global = true, env = "DEVSEARCH_DIR", default_value = "work")]
    pub dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Provider {
    /// Deterministic offline responses.
    Mock,
    /// OpenAI-compatible endpoint from DEVSEARCH_LLM_* variables.
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Embedder {
    /// Feature-hashing embedder, no network.
    Hash,
    /// OpenAI-compatible endpoint from DEVSEARCH_EMBED_* variables.
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Embedding,
    Bm25,
    Hybrid,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load device metadata and summary text into the work directory.
    Ingest {
        /// JSONL metadata, one device per line.
        #[arg(long)]
        metadata: PathBuf,
        /// Directory relative `summary_path` entries resolve against
        /// (defaults to the metadata file's directory).
        #[arg(long)]
        text_dir: Option<PathBuf>,
    },
    /// Extract the text features of every device.
    Extract {
        #[arg(long, value_enum, default_value = "mock")]
        provider: Provider,
        /// Reject item-count deviations instead of warning.
        #[arg(long)]
        strict: bool,
        /// Maximum characters per summary chunk.
        #[arg(long, default_value_t = devsearch::corpus::DEFAULT_CHUNK_LIMIT)]
        chunk_limit: usize,
        /// Attempts per provider call.
        #[arg(long, default_value_t = 3)]
        attempts: u32,
    },
    /// Embed the seven features of every device.
    Embed {
        #[arg(long, value_enum, default_value = "hash")]
        embedder: Embedder,
    },
    /// Build the search index.
    Index {
        /// Default weights recorded in the manifest.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Tune feature weights with TPE, then λ by grid search.
    Tune {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        /// Random trials before the density model is used.
        #[arg(long, default_value_t = 10)]
        startup: usize,
        /// Candidates drawn per suggestion.
        #[arg(long, default_value_t = 24)]
        candidates: usize,
        /// Validation cases per trial.
        #[arg(long, default_value_t = devsearch::tuning::DEFAULT_CASES)]
        cases: usize,
        /// Features JSONL restricting the devices cases come from.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = devsearch::tuning::DEFAULT_GRID_POINTS)]
        grid_points: usize,
        /// Source of simulated queries.
        #[arg(long, value_enum, default_value = "mock")]
        provider: Provider,
    },
    /// Evaluate ranked positions and Hit@K.
    Eval {
        /// JSONL cases: {"query", "matching_devices": [...]}.
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        variant: VariantArg,
        /// Weights to evaluate instead of the index defaults.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Report the sample rather than population standard deviation.
        #[arg(long)]
        sample_stdev: bool,
        /// Report JSON path (defaults to <dir>/eval_report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "DEVSEARCH_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Allowed browser origin, or `*`.
        #[arg(long, env = "DEVSEARCH_CORS_ORIGIN")]
        cors_origin: Option<String>,
        /// Weights overriding the index defaults.
        #[arg(long, env = "DEVSEARCH_WEIGHTS")]
        weights: Option<PathBuf>,
    },
}

fn completion_provider(p: Provider) -> StageResult<Box<dyn CompletionProvider>> {
    Ok(match p {
        Provider::Mock => Box::new(MockProvider),
        Provider::Live => Box::new(LiveChat::from_env().context("live provider")?),
    })
}

fn variants(v: VariantArg) -> Vec<Variant> {
    match v {
        VariantArg::Embedding => vec![Variant::Embedding],
        VariantArg::Bm25 => vec![Variant::Bm25],
        VariantArg::Hybrid => vec![Variant::Hybrid],
        VariantArg::All => Variant::ALL.to_vec(),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let StageError::Failed(inner) = &e {
                for cause in inner.chain().skip(1) {
                    log::debug!("caused by: {cause}");
                }
            }
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> StageResult<()> {
    let ws = Workspace::new(&cli.dir);
    match cli.command {
        Command::Ingest { metadata, text_dir } => {
            let text_dir =
                text_dir.or_else(|| metadata.parent().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
            let corpus = pipeline::ingest(&ws, &metadata, &text_dir)?;
            println!("ingested {} devices into {}", corpus.len(), ws.corpus().display());
        }
        Command::Extract { provider, strict, chunk_limit, attempts } => {
            if chunk_limit == 0 || attempts == 0 {
                return Err(anyhow::anyhow!("--chunk-limit and --attempts must be positive").into());
            }
            let retry = RetryPolicy { attempts, ..RetryPolicy::default() };
            let opts = ExtractOptions { chunk_limit, retry, strict };
            let provider = completion_provider(provider)?;
            let features = pipeline::extract(&ws, provider.as_ref(), &opts)?;
            let warned = features.iter().filter(|f| !f.warnings.is_empty()).count();
            println!("extracted {} feature sets ({warned} with warnings)", features.len());
        }
        Command::Embed { embedder } => {
            let provider: Box<dyn EmbeddingProvider> = match embedder {
                Embedder::Hash => Box::new(HashEmbedder),
                Embedder::Live => Box::new(LiveEmbedder::from_env().context("live embedder")?),
            };
            let n = pipeline::embed(&ws, provider.as_ref())?;
            println!("embedded {n} devices with {}", provider.family());
        }
        Command::Index { weights } => {
            let hash = pipeline::index(&ws, weights.as_deref())?;
            println!("index written to {} (manifest {hash})", ws.index().display());
        }
        Command::Tune { trials, seed, gamma, startup, candidates, cases, pool, grid_points, provider } => {
            let config =
                TpeConfig { n_startup_trials: startup, gamma, n_candidates: candidates, seed, ..TpeConfig::default() };
            config.validate().map_err(|e| anyhow::anyhow!(e))?;
            let opts = TuneOptions { trials, config, cases, grid_points, pool, ..TuneOptions::default() };
            let queries: Box<dyn SimulatedQueryProvider> = Box::new(PromptedQueries(completion_provider(provider)?));
            let summary = pipeline::tune(&ws, &opts, queries.as_ref())?;
            println!(
                "best trial {} Hit@5 {:.3}; λ = {:.2} (Hit@5 {:.3}); weights in {}",
                summary.best.trial_index,
                summary.best.objective,
                summary.lambda.best_lambda,
                summary.lambda.best_objective,
                ws.weights().display()
            );
        }
        Command::Eval { cases, variant, weights, sample_stdev, out } => {
            let stdev = if sample_stdev { StdevKind::Sample } else { StdevKind::Population };
            let reports = pipeline::eval(&ws, &cases, &variants(variant), weights.as_deref(), stdev)?;
            let out = out.unwrap_or_else(|| ws.root().join("eval_report.json"));
            pipeline::write_json(&out, &reports)?;
            print!("{}", render_table(&reports));
            println!("report written to {}", out.display());
        }
        Command::Serve { bind, cors_origin, weights } => serve(ws, bind, cors_origin, weights)?,
    }
    Ok(())
}

fn load(ws: &Workspace, weights: Option<&std::path::Path>) -> StageResult<Loaded> {
    let (index, hash) = pipeline::load_index(ws)?;
    let embedder = pipeline::embedder_for(&index.config().embedder_family)?;
    let mut loaded = Loaded::new(index, hash, embedder);
    if let Some(p) = weights {
        loaded.weights = pipeline::read_weights(p)?;
    }
    Ok(loaded)
}

fn serve(ws: Workspace, bind: SocketAddr, cors_origin: Option<String>, weights: Option<PathBuf>) -> StageResult<()> {
    let manifest = ws.index().join(devsearch::retrieval::MANIFEST_FILE);
    if !manifest.exists() {
        return Err(StageError::Missing(manifest));
    }
    if let Some(p) = &weights {
        if !p.exists() {
            return Err(StageError::Missing(p.clone()));
        }
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
        let addr = listener.local_addr().context("local address")?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();

        let state = AppState::loading();
        let app = api::router(state.clone(), cors_origin.as_deref());
        let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<StageError>();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let loader_state = state.clone();
        tokio::task::spawn_blocking(move || match load(&ws, weights.as_deref()) {
            Ok(loaded) => {
                log::info!("index loaded: {} devices", loaded.index.len());
                loader_state.set(loaded);
            }
            Err(e) => {
                let _ = fail_tx.send(e);
                let _ = stop_tx.send(());
            }
        });
        let shutdown = async move {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => log::info!("shutting down"),
                Ok(()) = stop_rx => {}
            }
        };
        api::serve(listener, app, shutdown).await.context("server error")?;
        match tokio::time::timeout(Duration::from_millis(10), fail_rx).await {
            Ok(Ok(e)) => Err(e),
            _ => Ok(()),
        }
    })
}
