use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bm25::{Bm25Params, Bm25Stats};
use super::keyword::{snippet, KeywordMode};
use super::weights::RetrievalWeights;
use super::RetrievalError;
use crate::corpus::{load_corpus, Corpus};
use crate::embedding::{dot, load_store, save_store, DeviceEmbeddings, EmbeddingVector, FeatureName, EMBEDDING_DIM};
use crate::extraction::{prompts::PROMPT_VERSION, read_features, write_features, FeatureSet};
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::text::{tokenize, TOKENIZER_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";
const BM25_FILE: &str = "bm25.json";
const SNIPPETS_FILE: &str = "snippets.jsonl";
const CORPUS_FILE: &str = "corpus.jsonl";
const FEATURES_FILE: &str = "features.jsonl";
const FORMAT_VERSION: u32 = 1;

/// The only BM25 normalization implemented: divide by the query's best score.
pub const BM25_NORMALIZATION: &str = "per_query_max";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub bm25: Bm25Params,
    pub keyword_mode: KeywordMode,
    pub default_weights: RetrievalWeights,
    pub embedder_family: String,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            keyword_mode: KeywordMode::Substring,
            default_weights: RetrievalWeights::default(),
            embedder_family: String::from("unspecified"),
        }
    }
}

/// Everything needed to reproduce query-time behavior of a persisted index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub tokenizer_version: String,
    pub k1: f64,
    pub b: f64,
    pub bm25_normalization: String,
    pub keyword_mode: KeywordMode,
    pub default_weights: RetrievalWeights,
    pub embedder_family: String,
    pub embedding_dim: usize,
    pub prompt_version: String,
    pub corpus_version_tag: String,
    pub corpus_size: usize,
}

#[derive(Serialize, Deserialize)]
struct SnippetLine {
    submission_id: String,
    snippet: String,
}

/// Immutable search structures over one corpus. Every per-device vector is
/// aligned with corpus order.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    pub(crate) corpus: Corpus,
    pub(crate) features: Vec<FeatureSet>,
    pub(crate) embeddings: Vec<DeviceEmbeddings>,
    /// `[device][feature]` vector norms.
    pub(crate) norms: Vec<[f64; 7]>,
    pub(crate) bm25: Bm25Stats,
    pub(crate) snippets: Vec<String>,
    pub(crate) config: IndexConfig,
}

/// Builds an index with default configuration.
pub fn build_index(
    corpus: Corpus,
    features: Vec<FeatureSet>,
    embeddings: Vec<DeviceEmbeddings>,
) -> Result<SearchIndex, RetrievalError> {
    build_index_with(corpus, features, embeddings, IndexConfig::default())
}

fn align<T>(corpus: &Corpus, items: Vec<T>, id: impl Fn(&T) -> &str, missing: &mut Vec<String>) -> Vec<Option<T>> {
    let mut slots: Vec<Option<T>> = (0..corpus.len()).map(|_| None).collect();
    for item in items {
        match corpus.position(id(&item)) {
            Some(i) => slots[i] = Some(item),
            None => log::warn!("ignoring entry for device {} not in corpus", id(&item)),
        }
    }
    for (slot, dev) in slots.iter().zip(corpus.iter()) {
        if slot.is_none() && !missing.contains(&dev.submission_id) {
            missing.push(dev.submission_id.clone());
        }
    }
    slots
}

pub fn build_index_with(
    corpus: Corpus,
    features: Vec<FeatureSet>,
    embeddings: Vec<DeviceEmbeddings>,
    config: IndexConfig,
) -> Result<SearchIndex, RetrievalError> {
    let mut missing = Vec::new();
    let features = align(&corpus, features, |f| &f.device_id, &mut missing);
    let embeddings = align(&corpus, embeddings, |e| &e.device_id, &mut missing);
    if !missing.is_empty() {
        missing.sort();
        return Err(RetrievalError::Coverage(missing));
    }
    let features: Vec<FeatureSet> = features.into_iter().map(Option::unwrap).collect();
    let embeddings: Vec<DeviceEmbeddings> = embeddings.into_iter().map(Option::unwrap).collect();

    let docs: Vec<Vec<String>> = features.iter().map(|f| tokenize(&f.bm25_document())).collect();
    let bm25 = Bm25Stats::build(&docs, config.bm25);
    let snippets = corpus.iter().zip(&features).map(|(d, f)| snippet(d, f)).collect();
    Ok(SearchIndex::assemble(corpus, features, embeddings, bm25, snippets, config))
}

impl SearchIndex {
    fn assemble(
        corpus: Corpus,
        features: Vec<FeatureSet>,
        embeddings: Vec<DeviceEmbeddings>,
        bm25: Bm25Stats,
        snippets: Vec<String>,
        config: IndexConfig,
    ) -> Self {
        let norms = embeddings.iter().map(|e| FeatureName::ALL.map(|f| e.get(f).norm())).collect();
        Self { corpus, features, embeddings, norms, bm25, snippets, config }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn features(&self) -> &[FeatureSet] {
        &self.features
    }

    pub fn features_of(&self, id: &str) -> Option<&FeatureSet> {
        self.corpus.position(id).map(|i| &self.features[i])
    }

    pub fn embeddings(&self) -> &[DeviceEmbeddings] {
        &self.embeddings
    }

    pub fn bm25_stats(&self) -> &Bm25Stats {
        &self.bm25
    }

    pub fn snippets(&self) -> &[String] {
        &self.snippets
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn default_weights(&self) -> RetrievalWeights {
        self.config.default_weights
    }

    /// Replaces the weights recorded as query-time defaults.
    pub fn set_default_weights(&mut self, weights: RetrievalWeights) {
        self.config.default_weights = weights;
    }

    pub(crate) fn position(&self, id: &str) -> Result<usize, RetrievalError> {
        self.corpus.position(id).ok_or_else(|| RetrievalError::UnknownDevice(id.to_string()))
    }

    /// BM25 score of one device for pre-tokenized query terms.
    pub fn bm25_score(&self, query_tokens: &[String], device_id: &str) -> Result<f64, RetrievalError> {
        Ok(self.bm25.score(self.position(device_id)?, query_tokens))
    }

    /// Cosine of the query with each of the device's feature vectors.
    pub(crate) fn cosines(&self, device: usize, query: &EmbeddingVector, query_norm: f64) -> [f64; 7] {
        let emb = &self.embeddings[device];
        let norms = &self.norms[device];
        FeatureName::ALL.map(|f| {
            let n = norms[f.index()];
            if n == 0.0 || query_norm == 0.0 {
                0.0
            } else {
                (dot(query.as_slice(), emb.get(f).as_slice()) / (n * query_norm)).clamp(-1.0, 1.0)
            }
        })
    }

    pub fn manifest(&self) -> IndexManifest {
        IndexManifest {
            format_version: FORMAT_VERSION,
            tokenizer_version: TOKENIZER_VERSION.to_string(),
            k1: self.config.bm25.k1,
            b: self.config.bm25.b,
            bm25_normalization: BM25_NORMALIZATION.to_string(),
            keyword_mode: self.config.keyword_mode,
            default_weights: self.config.default_weights,
            embedder_family: self.config.embedder_family.clone(),
            embedding_dim: EMBEDDING_DIM,
            prompt_version: PROMPT_VERSION.to_string(),
            corpus_version_tag: self.corpus.version_tag().to_string(),
            corpus_size: self.corpus.len(),
        }
    }

    /// Writes the index directory and returns the manifest hash.
    pub fn save(&self, dir: &Path) -> Result<String, RetrievalError> {
        let io = |e: std::io::Error| RetrievalError::Persist(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        self.corpus.save_jsonl(&dir.join(CORPUS_FILE))?;
        write_features(&dir.join(FEATURES_FILE), &self.features)?;
        save_store(dir, &self.embeddings)?;
        let bm25 = serde_json::to_vec(&self.bm25).map_err(|e| RetrievalError::Persist(e.to_string()))?;
        fs::write(dir.join(BM25_FILE), bm25).map_err(io)?;
        let lines: Vec<SnippetLine> = self
            .corpus
            .iter()
            .zip(&self.snippets)
            .map(|(d, s)| SnippetLine { submission_id: d.submission_id.clone(), snippet: s.clone() })
            .collect();
        write_jsonl(&dir.join(SNIPPETS_FILE), &lines).map_err(|e| RetrievalError::Persist(e.to_string()))?;
        let manifest =
            serde_json::to_vec_pretty(&self.manifest()).map_err(|e| RetrievalError::Persist(e.to_string()))?;
        fs::write(dir.join(MANIFEST_FILE), &manifest).map_err(io)?;
        Ok(manifest_hash(&manifest))
    }

    /// Loads an index directory, returning it with its manifest hash.
    pub fn load(dir: &Path) -> Result<(Self, String), RetrievalError> {
        let persist = |what: &str, e: &dyn std::fmt::Display| {
            RetrievalError::Persist(format!("{}: {e}", dir.join(what).display()))
        };
        let manifest_bytes = fs::read(dir.join(MANIFEST_FILE)).map_err(|e| persist(MANIFEST_FILE, &e))?;
        let manifest: IndexManifest =
            serde_json::from_slice(&manifest_bytes).map_err(|e| persist(MANIFEST_FILE, &e))?;
        if manifest.format_version != FORMAT_VERSION
            || manifest.tokenizer_version != TOKENIZER_VERSION
            || manifest.bm25_normalization != BM25_NORMALIZATION
            || manifest.embedding_dim != EMBEDDING_DIM
        {
            return Err(persist(MANIFEST_FILE, &"incompatible index format"));
        }

        let corpus_path = dir.join(CORPUS_FILE);
        let mut corpus = load_corpus(&corpus_path, dir)?;
        if corpus.version_tag() != manifest.corpus_version_tag {
            corpus = Corpus::new(corpus.devices().to_vec(), manifest.corpus_version_tag.clone())?;
        }
        let features = read_features(&dir.join(FEATURES_FILE))?;
        let embeddings = load_store(dir)?;
        let bm25_bytes = fs::read(dir.join(BM25_FILE)).map_err(|e| persist(BM25_FILE, &e))?;
        let bm25: Bm25Stats = serde_json::from_slice(&bm25_bytes).map_err(|e| persist(BM25_FILE, &e))?;
        let snippet_lines: Vec<SnippetLine> =
            read_jsonl(&dir.join(SNIPPETS_FILE)).map_err(|e| persist(SNIPPETS_FILE, &e))?;

        let n = corpus.len();
        if manifest.corpus_size != n
            || features.len() != n
            || embeddings.len() != n
            || bm25.n_docs != n
            || snippet_lines.len() != n
        {
            return Err(RetrievalError::Persist(format!("{}: index files disagree on device count", dir.display())));
        }
        let ids_match = corpus.iter().enumerate().all(|(i, d)| {
            features[i].device_id == d.submission_id
                && embeddings[i].device_id == d.submission_id
                && snippet_lines[i].submission_id == d.submission_id
        });
        if !ids_match {
            return Err(RetrievalError::Persist(format!(
                "{}: index files are not aligned to corpus order",
                dir.display()
            )));
        }
        let config = IndexConfig {
            bm25: Bm25Params { k1: manifest.k1, b: manifest.b },
            keyword_mode: manifest.keyword_mode,
            default_weights: manifest.default_weights,
            embedder_family: manifest.embedder_family,
        };
        let snippets = snippet_lines.into_iter().map(|s| s.snippet).collect();
        Ok((Self::assemble(corpus, features, embeddings, bm25, snippets, config), manifest_hash(&manifest_bytes)))
    }
}

fn manifest_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
