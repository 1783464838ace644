//! Hybrid ranking and keyword lookup.
//!
//! A device's score for a query is
//!
//! ```text
//! score = λ · Σᵢ wᵢ·cos(q, dᵢ) / Σᵢ wᵢ  +  (1 − λ) · bm25(q, d) / maxₓ bm25(q, x)
//! ```
//!
//! over the seven embedded features. BM25 is divided by the best BM25
//! score of the query across the corpus so both terms live in `[0, 1]`-ish
//! ranges; when nothing matches lexically the BM25 term is zero.

mod bm25;
mod hybrid;
mod index;
mod keyword;
mod weights;

pub use bm25::{Bm25Params, Bm25Stats};
pub use hybrid::{hybrid_score, rank_prepared, search, search_with, HybridComponents, PreparedQuery, ScoredResult};
pub use index::{
    build_index, build_index_with, IndexConfig, IndexManifest, SearchIndex, BM25_NORMALIZATION, MANIFEST_FILE,
};
pub use keyword::{keyword_search, keyword_search_with, KeywordMode};
pub use weights::{RetrievalWeights, WeightError, DEFAULT_LAMBDA, DEFAULT_WEIGHTS, WEIGHT_RANGE};

use crate::corpus::CorpusError;
use crate::embedding::{EmbeddingError, StoreError};
use crate::extraction::ExtractionError;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("index does not cover devices: {}", .0.join(", "))]
    Coverage(Vec<String>),
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("query embedding failed")]
    Embed(#[from] EmbeddingError),
    #[error("index files: {0}")]
    Persist(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Features(#[from] ExtractionError),
    #[error(transparent)]
    Weights(#[from] WeightError),
}
