//! Pipeline stages over a work directory. Each stage reads the artifacts of
//! the previous one and writes its own.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use devsearch::corpus::CorpusError;
use devsearch::embedding::{embed_device, load_store, save_store, EmbeddingProvider, HashEmbedder};
use devsearch::evaluation::{evaluate_with, read_cases, EvalOptions, EvalReport, StdevKind};
use devsearch::extraction::{
    extract_features, read_features, write_features, CompletionProvider, ExtractOptions, FeatureSet,
    SimulatedQueryProvider,
};
use devsearch::par::{try_map_indexed, Execution};
use devsearch::retrieval::{build_index_with, IndexConfig};
use devsearch::tuning::{
    grid_search_lambda, optimize_weights, sample_cases, write_history, LambdaSearch, TpeConfig, TrialRecord,
    TuningContext, DEFAULT_GRID_POINTS,
};
use devsearch::{load_corpus, Corpus, RetrievalWeights, SearchIndex, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::live::LiveEmbedder;

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("missing input artifact: {}", .0.display())]
    Missing(PathBuf),
    #[error(transparent)]
    Failed(#[from] anyhow::Error),
}

impl StageError {
    /// 2 for a missing upstream artifact, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Missing(_) => 2,
            StageError::Failed(_) => 1,
        }
    }
}

pub type StageResult<T> = Result<T, StageError>;

fn require(path: &Path) -> StageResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(StageError::Missing(path.to_path_buf()))
    }
}

/// Artifact layout of a work directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.jsonl")
    }

    pub fn state(&self) -> PathBuf {
        self.root.join("pipeline.json")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.jsonl")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index")
    }

    pub fn weights(&self) -> PathBuf {
        self.root.join("weights.json")
    }

    pub fn history(&self) -> PathBuf {
        self.root.join("tuning_history.jsonl")
    }

    pub fn lambda_curve(&self) -> PathBuf {
        self.root.join("lambda_curve.json")
    }
}

/// Facts a later stage needs from an earlier one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    #[serde(default)]
    pub corpus_version_tag: Option<String>,
    #[serde(default)]
    pub embedder_family: Option<String>,
}

impl PipelineState {
    fn load(ws: &Workspace) -> StageResult<Self> {
        let path = ws.state();
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }

    fn save(&self, ws: &Workspace) -> StageResult<()> {
        write_json(&ws.state(), self)
    }
}

fn corpus_error(e: CorpusError) -> StageError {
    match e {
        CorpusError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => StageError::Missing(path),
        other => StageError::Failed(other.into()),
    }
}

/// Loads metadata and summaries and writes the normalized corpus.
pub fn ingest(ws: &Workspace, metadata: &Path, text_dir: &Path) -> StageResult<Corpus> {
    require(metadata)?;
    let corpus = load_corpus(metadata, text_dir).map_err(corpus_error)?;
    fs::create_dir_all(ws.root()).with_context(|| format!("creating {}", ws.root().display()))?;
    corpus.save_jsonl(&ws.corpus()).map_err(|e| StageError::Failed(e.into()))?;
    let mut state = PipelineState::load(ws)?;
    state.corpus_version_tag = Some(corpus.version_tag().to_string());
    state.save(ws)?;
    Ok(corpus)
}

pub fn read_corpus(ws: &Workspace) -> StageResult<Corpus> {
    require(&ws.corpus())?;
    let corpus = load_corpus(&ws.corpus(), ws.root()).map_err(corpus_error)?;
    match PipelineState::load(ws)?.corpus_version_tag {
        Some(tag) => Corpus::new(corpus.devices().to_vec(), tag).map_err(|e| StageError::Failed(e.into())),
        None => Ok(corpus),
    }
}

/// Runs the extraction chain for every device.
pub fn extract(
    ws: &Workspace,
    provider: &dyn CompletionProvider,
    opts: &ExtractOptions,
) -> StageResult<Vec<FeatureSet>> {
    let corpus = read_corpus(ws)?;
    let devices = corpus.devices();
    let features = try_map_indexed(devices.len(), Execution::auto(), |i| extract_features(&devices[i], provider, opts))
        .context("feature extraction failed")?;
    for f in features.iter().filter(|f| !f.warnings.is_empty()) {
        log::warn!("{}: {}", f.device_id, f.warnings.join("; "));
    }
    write_features(&ws.features(), &features).context("writing features")?;
    Ok(features)
}

/// Embeds the seven features of every device.
pub fn embed(ws: &Workspace, provider: &dyn EmbeddingProvider) -> StageResult<usize> {
    require(&ws.features())?;
    let features = read_features(&ws.features()).context("reading features")?;
    let rows = try_map_indexed(features.len(), Execution::auto(), |i| embed_device(&features[i], provider))
        .context("embedding failed")?;
    save_store(&ws.embeddings(), &rows).context("writing embedding store")?;
    let mut state = PipelineState::load(ws)?;
    state.embedder_family = Some(provider.family());
    state.save(ws)?;
    Ok(rows.len())
}

pub fn read_weights(path: &Path) -> StageResult<RetrievalWeights> {
    require(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("invalid weights in {}", path.display()))?)
}

/// Builds and persists the search index; returns the manifest hash.
pub fn index(ws: &Workspace, weights: Option<&Path>) -> StageResult<String> {
    let corpus = read_corpus(ws)?;
    require(&ws.features())?;
    require(&ws.embeddings())?;
    let features = read_features(&ws.features()).context("reading features")?;
    let embeddings = load_store(&ws.embeddings()).context("reading embedding store")?;
    let state = PipelineState::load(ws)?;
    let default_weights = match weights {
        Some(p) => read_weights(p)?,
        None => RetrievalWeights::default(),
    };
    let config = IndexConfig {
        default_weights,
        embedder_family: state.embedder_family.unwrap_or_else(|| HashEmbedder.family()),
        ..IndexConfig::default()
    };
    let built = build_index_with(corpus, features, embeddings, config).context("building index")?;
    Ok(built.save(&ws.index()).context("saving index")?)
}

pub fn load_index(ws: &Workspace) -> StageResult<(SearchIndex, String)> {
    let dir = ws.index();
    require(&dir.join(devsearch::retrieval::MANIFEST_FILE))?;
    Ok(SearchIndex::load(&dir).context("loading index")?)
}

/// Query-time embedder matching the family recorded in the index.
pub fn embedder_for(family: &str) -> StageResult<Box<dyn EmbeddingProvider>> {
    if family == HashEmbedder.family() {
        return Ok(Box::new(HashEmbedder));
    }
    let live = LiveEmbedder::from_env().with_context(|| format!("index was embedded with {family}"))?;
    if live.family() != family {
        return Err(anyhow::anyhow!(
            "index was embedded with {family} but the configured embedder is {}",
            live.family()
        )
        .into());
    }
    Ok(Box::new(live))
}

#[derive(Debug, Clone)]
pub struct TuneOptions {
    pub trials: usize,
    pub config: TpeConfig,
    pub cases: usize,
    pub replace_fraction: f64,
    pub grid_points: usize,
    /// Features JSONL restricting which devices cases are drawn from.
    pub pool: Option<PathBuf>,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            config: TpeConfig::default(),
            cases: devsearch::tuning::DEFAULT_CASES,
            replace_fraction: devsearch::tuning::DEFAULT_REPLACE_FRACTION,
            grid_points: DEFAULT_GRID_POINTS,
            pool: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneSummary {
    pub best: TrialRecord,
    pub lambda: LambdaSearch,
    pub weights: RetrievalWeights,
}

/// Weight phase, then λ grid on a fresh fixed case set. Writes the trial
/// history, the λ curve and the final weights.
pub fn tune(ws: &Workspace, opts: &TuneOptions, queries: &dyn SimulatedQueryProvider) -> StageResult<TuneSummary> {
    let (index, _) = load_index(ws)?;
    let embedder = embedder_for(&index.config().embedder_family)?;
    let pool: Vec<FeatureSet> = match &opts.pool {
        Some(p) => {
            require(p)?;
            read_features(p).context("reading pool")?
        }
        None => index.features().to_vec(),
    };
    if let Some(f) = pool.iter().find(|f| index.corpus().get(&f.device_id).is_none()) {
        return Err(anyhow::anyhow!("pool device {} is not indexed", f.device_id).into());
    }
    let ctx = TuningContext {
        n_cases: opts.cases,
        replace_fraction: opts.replace_fraction,
        ..TuningContext::new(&index, &pool, embedder.as_ref(), queries)
    };
    let outcome = optimize_weights(&ctx, opts.trials, &opts.config).context("weight optimization")?;
    write_history(&ws.history(), &outcome.history, &opts.config).context("writing history")?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.config.seed.wrapping_add(1));
    let cases = sample_cases(&pool, opts.cases, queries, &mut rng).context("sampling grid cases")?;
    let lambda = grid_search_lambda(&index, &outcome.best.weights, &cases, embedder.as_ref(), opts.grid_points)
        .context("lambda grid search")?;
    let weights = outcome.best.weights.with_lambda(lambda.best_lambda).context("final weights")?;
    write_json(&ws.weights(), &weights)?;
    write_json(&ws.lambda_curve(), &lambda)?;
    Ok(TuneSummary { best: outcome.best, lambda, weights })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> StageResult<()> {
    let json = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One report per variant.
pub fn eval(
    ws: &Workspace,
    cases: &Path,
    variants: &[Variant],
    weights: Option<&Path>,
    stdev: StdevKind,
) -> StageResult<Vec<EvalReport>> {
    let (index, _) = load_index(ws)?;
    require(cases)?;
    let cases = read_cases(cases).context("reading cases")?;
    let weights = match weights {
        Some(p) => read_weights(p)?,
        None => index.default_weights(),
    };
    let embedder = embedder_for(&index.config().embedder_family)?;
    let opts = EvalOptions { stdev, measure_latency: true };
    variants
        .iter()
        .map(|&v| {
            evaluate_with(&index, &weights, &cases, v, embedder.as_ref(), opts)
                .with_context(|| format!("evaluating {}", v.label()))
                .map_err(StageError::from)
        })
        .collect()
}
