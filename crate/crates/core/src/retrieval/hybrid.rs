use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::index::SearchIndex;
use super::weights::RetrievalWeights;
use super::RetrievalError;
use crate::embedding::{EmbeddingProvider, EmbeddingVector};
use crate::par::{map_indexed, Execution};
use crate::text::tokenize;

/// One ranked device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResult {
    pub device_id: String,
    pub score: f64,
    pub embedding_component: f64,
    pub bm25_component_normalized: f64,
    pub rank: usize,
}

/// The two blended terms and their blend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridComponents {
    pub embedding_component: f64,
    pub bm25_component_normalized: f64,
    pub score: f64,
}

impl HybridComponents {
    fn blend(weights: &RetrievalWeights, cosines: &[f64; 7], bm25: f64, bm25_max: f64) -> Self {
        let w = weights.weights();
        let embedding_component = w.iter().zip(cosines).map(|(w, c)| w * c).sum::<f64>() / weights.sum();
        let bm25_component_normalized = if bm25_max > 0.0 { bm25 / bm25_max } else { 0.0 };
        let lambda = weights.lambda();
        Self {
            embedding_component,
            bm25_component_normalized,
            score: lambda * embedding_component + (1.0 - lambda) * bm25_component_normalized,
        }
    }
}

/// Scores one device. `bm25_query_max` is the best BM25 score of this query
/// over the whole corpus, or 0 when no device matches lexically.
pub fn hybrid_score(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    query_embedding: &EmbeddingVector,
    query_tokens: &[String],
    device_id: &str,
    bm25_query_max: f64,
) -> Result<HybridComponents, RetrievalError> {
    let i = index.position(device_id)?;
    let cosines = index.cosines(i, query_embedding, query_embedding.norm());
    let bm25 = index.bm25.score(i, query_tokens);
    Ok(HybridComponents::blend(weights, &cosines, bm25, bm25_query_max))
}

/// A query embedded and tokenized once, with its BM25 scores against every
/// device. Weight-independent, so it can be reused across weight settings.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub text: String,
    pub embedding: EmbeddingVector,
    pub tokens: Vec<String>,
    pub bm25: Vec<f64>,
    pub bm25_max: f64,
}

impl PreparedQuery {
    pub fn new<P: EmbeddingProvider + ?Sized>(
        index: &SearchIndex,
        query: &str,
        provider: &P,
        exec: Execution,
    ) -> Result<Self, RetrievalError> {
        let embedding = provider.embed(query)?;
        let tokens = tokenize(query);
        let bm25 = map_indexed(index.len(), exec, |i| index.bm25.score(i, &tokens));
        let bm25_max = bm25.iter().copied().fold(0.0, f64::max);
        Ok(Self { text: query.to_string(), embedding, tokens, bm25, bm25_max })
    }
}

/// Ranks every device for a prepared query and returns the best `k`.
/// Ties order by ascending submission id.
pub fn rank_prepared(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    query: &PreparedQuery,
    k: usize,
    exec: Execution,
) -> Vec<ScoredResult> {
    let qnorm = query.embedding.norm();
    let comps = map_indexed(index.len(), exec, |i| {
        let cosines = index.cosines(i, &query.embedding, qnorm);
        HybridComponents::blend(weights, &cosines, query.bm25[i], query.bm25_max)
    });
    let mut order: Vec<usize> = (0..index.len()).collect();
    // corpus order is ascending submission id
    order.sort_by(|&a, &b| comps[b].score.partial_cmp(&comps[a].score).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, i)| ScoredResult {
            device_id: index.corpus.devices()[i].submission_id.clone(),
            score: comps[i].score,
            embedding_component: comps[i].embedding_component,
            bm25_component_normalized: comps[i].bm25_component_normalized,
            rank: r + 1,
        })
        .collect()
}

/// Hybrid search returning the top `k` devices (all of them when `k`
/// exceeds the corpus size).
pub fn search<P: EmbeddingProvider + ?Sized>(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    query: &str,
    provider: &P,
    k: usize,
) -> Result<Vec<ScoredResult>, RetrievalError> {
    search_with(index, weights, query, provider, k, Execution::auto())
}

pub fn search_with<P: EmbeddingProvider + ?Sized>(
    index: &SearchIndex,
    weights: &RetrievalWeights,
    query: &str,
    provider: &P,
    k: usize,
    exec: Execution,
) -> Result<Vec<ScoredResult>, RetrievalError> {
    let prepared = PreparedQuery::new(index, query, provider, exec)?;
    Ok(rank_prepared(index, weights, &prepared, k, exec))
}
