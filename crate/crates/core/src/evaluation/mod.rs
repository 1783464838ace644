//! Ranked-position evaluation: position statistics, Hit@K and latency for
//! embedding-only, BM25-only and hybrid scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingProvider;
use crate::jsonl::{read_jsonl, JsonlError};
use crate::par::{try_map_indexed, Execution};
use crate::retrieval::{
    rank_prepared, search_with, PreparedQuery, RetrievalError, RetrievalWeights, ScoredResult, SearchIndex,
};

pub const HIT_KS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no evaluation cases")]
    NoCases,
    #[error("case {0} lists no matching devices")]
    NoMatches(usize),
    #[error("device {0} is not in the ranking")]
    NotRanked(String),
    #[error("latency measurement needs at least 10 queries, got {0}")]
    TooFewQueries(usize),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// A query and every device that counts as a correct answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub query: String,
    pub matching_devices: BTreeSet<String>,
}

pub fn read_cases(path: &Path) -> Result<Vec<EvalCase>, EvalError> {
    Ok(read_jsonl(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Embedding,
    Bm25,
    Hybrid,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Embedding, Variant::Bm25, Variant::Hybrid];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Embedding => "Embedding",
            Variant::Bm25 => "BM25",
            Variant::Hybrid => "Hybrid",
        }
    }

    /// Weights with λ set for this variant: 1, 0, or as configured.
    pub fn weights(self, base: &RetrievalWeights) -> RetrievalWeights {
        let lambda = match self {
            Variant::Embedding => 1.0,
            Variant::Bm25 => 0.0,
            Variant::Hybrid => base.lambda(),
        };
        base.with_lambda(lambda).expect("lambda in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdevKind {
    #[default]
    Population,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: Variant,
    pub n_cases: usize,
    pub avg_position: f64,
    pub median_position: f64,
    pub min_position: f64,
    pub max_position: f64,
    pub stdev_position: f64,
    pub hit_at: BTreeMap<usize, f64>,
    pub mean_latency_s: f64,
    pub stdev_latency_s: f64,
    /// 1-based position of the first match for each case, in case order.
    pub positions: Vec<usize>,
}

/// Rank of the best-placed matching device.
pub fn rank_position(ranked: &[ScoredResult], matches: &BTreeSet<String>) -> Result<usize, EvalError> {
    for m in matches {
        if !ranked.iter().any(|r| &r.device_id == m) {
            return Err(EvalError::NotRanked(m.clone()));
        }
    }
    ranked.iter().find(|r| matches.contains(&r.device_id)).map(|r| r.rank).ok_or(EvalError::NoMatches(0))
}

fn mean_sd(xs: &[f64], kind: StdevKind) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let denom = match kind {
        StdevKind::Population => n,
        StdevKind::Sample => (n - 1.0).max(1.0),
    };
    (mean, (ss / denom).sqrt())
}

/// Summary statistics over first-match positions.
pub fn summarize_positions(variant: Variant, positions: Vec<usize>, kind: StdevKind, latencies: &[f64]) -> EvalReport {
    let mut sorted = positions.clone();
    sorted.sort_unstable();
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] as f64 } else { (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0 };
    let as_f: Vec<f64> = positions.iter().map(|&p| p as f64).collect();
    let (avg, sd) = mean_sd(&as_f, kind);
    let hit_at = HIT_KS.iter().map(|&k| (k, positions.iter().filter(|&&p| p <= k).count() as f64 / n as f64)).collect();
    let (mean_latency_s, stdev_latency_s) =
        if latencies.is_empty() { (0.0, 0.0) } else { mean_sd(latencies, StdevKind::Population) };
    EvalReport {
        variant,
        n_cases: n,
        avg_position: avg,
        median_position: median,
        min_position: sorted[0] as f64,
        max_position: sorted[n - 1] as f64,
        stdev_position: sd,
        hit_at,
        mean_latency_s,
        stdev_latency_s,
        positions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub stdev: StdevKind,
    /// Time each case's search in a separate single-threaded pass.
    pub measure_latency: bool,
}

/// Full-ranking evaluation of `cases` with [`EvalOptions::default`] plus
/// latency timing.
pub fn evaluate(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    cases: &[EvalCase],
    variant: Variant,
    embedder: &dyn EmbeddingProvider,
) -> Result<EvalReport, EvalError> {
    let opts = EvalOptions { measure_latency: true, ..EvalOptions::default() };
    evaluate_with(index, weights, cases, variant, embedder, opts)
}

pub fn evaluate_with(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    cases: &[EvalCase],
    variant: Variant,
    embedder: &dyn EmbeddingProvider,
    opts: EvalOptions,
) -> Result<EvalReport, EvalError> {
    if cases.is_empty() {
        return Err(EvalError::NoCases);
    }
    for (i, c) in cases.iter().enumerate() {
        if c.matching_devices.is_empty() {
            return Err(EvalError::NoMatches(i));
        }
        if let Some(missing) = c.matching_devices.iter().find(|id| index.corpus().get(id).is_none()) {
            return Err(EvalError::NotRanked(missing.clone()));
        }
    }
    let weights = variant.weights(weights);
    let n = index.len();
    let positions = try_map_indexed(cases.len(), Execution::auto(), |i| {
        let q = PreparedQuery::new(index, &cases[i].query, embedder, Execution::Sequential)?;
        let ranked = rank_prepared(index, &weights, &q, n, Execution::Sequential);
        rank_position(&ranked, &cases[i].matching_devices)
    })?;
    let latencies = if opts.measure_latency {
        let mut out = Vec::with_capacity(cases.len());
        for c in cases {
            let start = Instant::now();
            search_with(index, &weights, &c.query, embedder, n, Execution::Sequential)?;
            out.push(start.elapsed().as_secs_f64());
        }
        out
    } else {
        Vec::new()
    };
    Ok(summarize_positions(variant, positions, opts.stdev, &latencies))
}

/// Mean and population SD, in seconds, of end-to-end hybrid searches
/// (embed, score, sort) over a warm index, run on one thread.
pub fn measure_latency(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    queries: &[String],
    embedder: &dyn EmbeddingProvider,
) -> Result<(f64, f64), EvalError> {
    if queries.len() < 10 {
        return Err(EvalError::TooFewQueries(queries.len()));
    }
    search_with(index, weights, &queries[0], embedder, 10, Execution::Sequential)?;
    let mut times = Vec::with_capacity(queries.len());
    for q in queries {
        let start = Instant::now();
        let results = search_with(index, weights, q, embedder, 10, Execution::Sequential)?;
        std::hint::black_box(results);
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(mean_sd(&times, StdevKind::Population))
}

fn fmt_row(out: &mut String, label: &str, cells: impl Iterator<Item = String>) {
    let _ = write!(out, "{label:<18}");
    for c in cells {
        let _ = write!(out, "{c:>11}");
    }
    out.push('\n');
}

/// Aligned text table with one column per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    fmt_row(&mut out, "Metric", reports.iter().map(|r| r.variant.label().to_string()));
    let rule = "-".repeat(18 + 11 * reports.len());
    out.push_str(&rule);
    out.push('\n');
    type Row = (&'static str, fn(&EvalReport) -> f64);
    let rows: [Row; 5] = [
        ("Average position", |r| r.avg_position),
        ("Median position", |r| r.median_position),
        ("Min position", |r| r.min_position),
        ("Max position", |r| r.max_position),
        ("Stdev position", |r| r.stdev_position),
    ];
    for (label, get) in rows {
        fmt_row(&mut out, label, reports.iter().map(|r| format!("{:.2}", get(r))));
    }
    for k in HIT_KS {
        fmt_row(
            &mut out,
            &format!("Hit@K = {k}"),
            reports.iter().map(|r| format!("{:.3}", r.hit_at.get(&k).copied().unwrap_or(f64::NAN))),
        );
    }
    fmt_row(&mut out, "Mean latency (s)", reports.iter().map(|r| format!("{:.4}", r.mean_latency_s)));
    out.push_str(&rule);
    out.push('\n');
    out
}
