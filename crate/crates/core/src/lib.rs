//! Hybrid semantic + lexical search over regulatory device summaries.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`corpus`]: device records, JSONL ingestion, document chunking
//! - [`extraction`]: LLM prompt chain producing a [`extraction::FeatureSet`] per device
//! - [`embedding`]: 384-dim embedding contract, hashing embedder, binary store
//! - [`retrieval`]: BM25 statistics, weighted-cosine + BM25 hybrid ranking, keyword lookup
//! - [`tuning`]: TPE search over feature weights and a grid search over the blend λ
//! - [`evaluation`]: ranked-position statistics, Hit@K and latency
//!
//! Per-device scoring and per-case evaluation fan out over rayon when the
//! `parallel` feature is enabled (the default); see [`par`].

pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod extraction;
pub mod par;
pub mod retrieval;
pub mod synthetic;
pub mod text;
pub mod tuning;

mod jsonl;

pub use corpus::{chunk_document, load_corpus, Corpus, DeviceRecord, DocumentChunk, Pathway};
pub use embedding::{
    cosine_similarity, embed_device, hash_embed, DeviceEmbeddings, EmbeddingProvider, EmbeddingVector, FeatureName,
    HashEmbedder, EMBEDDING_DIM,
};
pub use evaluation::{evaluate, measure_latency, rank_position, EvalCase, EvalReport, Variant};
pub use extraction::{
    extract_features, generate_simulated_query, parse_feature_response, CompletionProvider, FeatureSet,
};
pub use retrieval::{build_index, keyword_search, search, RetrievalWeights, ScoredResult, SearchIndex};
pub use tuning::{grid_search_lambda, objective_hit5, optimize_weights, QueryCase, TpeConfig};
