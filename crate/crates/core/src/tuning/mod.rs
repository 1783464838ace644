//! Weight tuning.
//!
//! The seven feature weights are searched with TPE against mean Hit@5 on
//! simulated device-query pairs, with a fraction of the pairs replaced
//! after every trial. The weight phase scores with λ = 1 (embedding only);
//! λ is then chosen by a grid search with the best weights frozen.

mod tpe;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use tpe::{good_set_size, tpe_suggest, Parzen, TpeConfig, BANDWIDTH_RULE};

use crate::embedding::EmbeddingProvider;
use crate::extraction::{ExtractionError, FeatureSet, SimulatedQueryProvider};
use crate::par::{try_map_indexed, Execution};
use crate::retrieval::{rank_prepared, PreparedQuery, RetrievalError, RetrievalWeights, SearchIndex};

pub const HIT_K: usize = 5;
pub const DEFAULT_REPLACE_FRACTION: f64 = 0.2;
pub const DEFAULT_CASES: usize = 50;
pub const DEFAULT_GRID_POINTS: usize = 21;

#[derive(Debug, thiserror::Error)]
pub enum TuningError {
    #[error("ground-truth device {0} is not in the index")]
    UnknownGroundTruth(String),
    #[error("no query cases")]
    NoCases,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A query paired with the device it was generated from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCase {
    pub query: String,
    pub ground_truth_device: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub weights: RetrievalWeights,
    pub objective: f64,
    /// Incremented each time the case list is refreshed.
    pub validation_snapshot_id: usize,
}

/// Shared inputs of the tuning routines.
pub struct TuningContext<'a> {
    pub index: &'a SearchIndex,
    /// Devices cases may be drawn from; all must be indexed.
    pub pool: &'a [FeatureSet],
    pub embedder: &'a dyn EmbeddingProvider,
    pub queries: &'a dyn SimulatedQueryProvider,
    pub n_cases: usize,
    pub replace_fraction: f64,
}

impl<'a> TuningContext<'a> {
    pub fn new(
        index: &'a SearchIndex,
        pool: &'a [FeatureSet],
        embedder: &'a dyn EmbeddingProvider,
        queries: &'a dyn SimulatedQueryProvider,
    ) -> Self {
        Self { index, pool, embedder, queries, n_cases: DEFAULT_CASES, replace_fraction: DEFAULT_REPLACE_FRACTION }
    }
}

/// Fraction of cases whose ground truth is ranked within the top `k`.
pub fn hit_rate(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    cases: &[QueryCase],
    embedder: &dyn EmbeddingProvider,
    k: usize,
) -> Result<f64, TuningError> {
    if cases.is_empty() {
        return Err(TuningError::NoCases);
    }
    for c in cases {
        if index.corpus().get(&c.ground_truth_device).is_none() {
            return Err(TuningError::UnknownGroundTruth(c.ground_truth_device.clone()));
        }
    }
    let hits = try_map_indexed(cases.len(), Execution::auto(), |i| {
        let case = &cases[i];
        let q = PreparedQuery::new(index, &case.query, embedder, Execution::Sequential)?;
        let top = rank_prepared(index, weights, &q, k, Execution::Sequential);
        Ok::<_, RetrievalError>(top.iter().any(|r| r.device_id == case.ground_truth_device))
    })?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / cases.len() as f64)
}

/// Mean Hit@5 over `cases` under `weights` exactly as given.
pub fn objective_hit5(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    cases: &[QueryCase],
    embedder: &dyn EmbeddingProvider,
) -> Result<f64, TuningError> {
    hit_rate(index, weights, cases, embedder, HIT_K)
}

fn make_case(features: &FeatureSet, queries: &dyn SimulatedQueryProvider) -> Result<QueryCase, TuningError> {
    Ok(QueryCase { query: queries.generate(features)?, ground_truth_device: features.device_id.clone() })
}

/// Draws `n` distinct pool devices (all of them if the pool is smaller)
/// and generates a query for each.
pub fn sample_cases<R: Rng + ?Sized>(
    pool: &[FeatureSet],
    n: usize,
    queries: &dyn SimulatedQueryProvider,
    rng: &mut R,
) -> Result<Vec<QueryCase>, TuningError> {
    let n = n.min(pool.len());
    let mut picked = sample(rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| make_case(&pool[i], queries)).collect()
}

/// Replaces `⌊fraction·n⌋` randomly chosen cases with fresh pairs, drawn
/// from pool devices not already in the list when enough remain. The other
/// cases are kept verbatim.
pub fn replace_pairs<R: Rng + ?Sized>(
    cases: &[QueryCase],
    pool: &[FeatureSet],
    fraction: f64,
    queries: &dyn SimulatedQueryProvider,
    rng: &mut R,
) -> Result<Vec<QueryCase>, TuningError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(TuningError::Config(format!("replace fraction {fraction} outside [0, 1]")));
    }
    let n = cases.len();
    let n_replace = ((fraction * n as f64 + 1e-9).floor() as usize).min(n);
    if n_replace == 0 || pool.is_empty() {
        return Ok(cases.to_vec());
    }
    let mut slots = sample(rng, n, n_replace).into_vec();
    slots.sort_unstable();

    let current: HashSet<&str> = cases.iter().map(|c| c.ground_truth_device.as_str()).collect();
    let fresh: Vec<usize> = (0..pool.len()).filter(|&i| !current.contains(pool[i].device_id.as_str())).collect();
    let take = n_replace.min(fresh.len());
    let mut picks: Vec<usize> = sample(rng, fresh.len(), take).into_iter().map(|j| fresh[j]).collect();
    while picks.len() < n_replace {
        picks.push(rng.random_range(0..pool.len()));
    }

    let mut out = cases.to_vec();
    for (slot, device) in slots.into_iter().zip(picks) {
        out[slot] = make_case(&pool[device], queries)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    pub best: TrialRecord,
    pub history: Vec<TrialRecord>,
}

/// Highest objective, earliest trial on ties.
pub fn best_trial(history: &[TrialRecord]) -> Option<&TrialRecord> {
    history.iter().fold(None, |best: Option<&TrialRecord>, t| match best {
        Some(b) if b.objective >= t.objective => Some(b),
        _ => Some(t),
    })
}

/// Runs `n_trials` rounds of suggest, evaluate (λ = 1), record, replace.
pub fn optimize_weights(
    ctx: &TuningContext<'_>,
    n_trials: usize,
    config: &TpeConfig,
) -> Result<TuningOutcome, TuningError> {
    config.validate().map_err(TuningError::Config)?;
    if n_trials < 1 {
        return Err(TuningError::Config("n_trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cases = sample_cases(ctx.pool, ctx.n_cases, ctx.queries, &mut rng)?;
    let mut history = Vec::with_capacity(n_trials);
    for trial_index in 0..n_trials {
        let w = tpe_suggest(&history, config, &mut rng);
        let weights = RetrievalWeights::new(w, 1.0).map_err(RetrievalError::from)?;
        let objective = objective_hit5(ctx.index, &weights, &cases, ctx.embedder)?;
        log::debug!("trial {trial_index}: objective {objective:.3}");
        // the case set is refreshed once per trial, so snapshot ids follow trial ids
        history.push(TrialRecord { trial_index, weights, objective, validation_snapshot_id: trial_index });
        cases = replace_pairs(&cases, ctx.pool, ctx.replace_fraction, ctx.queries, &mut rng)?;
    }
    let best = best_trial(&history).expect("non-empty").clone();
    Ok(TuningOutcome { best, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub best_lambda: f64,
    pub best_objective: f64,
    /// `(λ, Hit@5)` for every grid point, ascending λ.
    pub curve: Vec<(f64, f64)>,
}

/// `n_points` evenly spaced values from 0 to 1 inclusive.
pub fn lambda_grid(n_points: usize) -> Vec<f64> {
    (0..n_points).map(|i| i as f64 / (n_points - 1) as f64).collect()
}

/// Evaluates Hit@5 with full hybrid scoring at every grid λ on one fixed
/// case set. The maximum wins, larger λ on ties.
pub fn grid_search_lambda(
    index: &SearchIndex,
    frozen: &RetrievalWeights,
    cases: &[QueryCase],
    embedder: &dyn EmbeddingProvider,
    n_points: usize,
) -> Result<LambdaSearch, TuningError> {
    if n_points < 2 {
        return Err(TuningError::Config("grid needs at least 2 points".into()));
    }
    let mut curve = Vec::with_capacity(n_points);
    for lambda in lambda_grid(n_points) {
        let weights = frozen.with_lambda(lambda).map_err(RetrievalError::from)?;
        curve.push((lambda, objective_hit5(index, &weights, cases, embedder)?));
    }
    let (best_lambda, best_objective) =
        curve
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, (l, o)| if o >= best.1 { (l, o) } else { best });
    Ok(LambdaSearch { best_lambda, best_objective, curve })
}

#[derive(Serialize)]
struct HistoryLine<'a> {
    #[serde(flatten)]
    record: &'a TrialRecord,
    seed: u64,
    config_hash: &'a str,
}

/// One JSON object per trial, tagged with the seed and config hash.
pub fn write_history(path: &Path, history: &[TrialRecord], config: &TpeConfig) -> Result<(), TuningError> {
    let hash = config.hash();
    let mut w = BufWriter::new(File::create(path)?);
    for record in history {
        let line = HistoryLine { record, seed: config.seed, config_hash: &hash };
        serde_json::to_writer(&mut w, &line).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
