//! Embedding contract and vector math.
//!
//! Every vector has [`EMBEDDING_DIM`] entries. Device feature vectors are
//! L2-normalized when produced by [`embed_device`]; zero vectors are kept
//! as-is and reported in [`DeviceEmbeddings::degenerate`].

mod hash;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extraction::FeatureSet;

pub use hash::{hash_embed, HashEmbedder};
pub use store::{load_store, save_store, StoreError, STORE_BIN, STORE_SIDECAR};

pub const EMBEDDING_DIM: usize = 384;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("expected {EMBEDDING_DIM} dimensions, got {0}")]
    Dimension(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("embedding feature {feature} of {device_id} failed")]
    Feature {
        device_id: String,
        feature: FeatureName,
        #[source]
        source: Box<EmbeddingError>,
    },
}

/// The seven device features that receive an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureName {
    #[serde(rename = "keywords")]
    Keywords,
    #[serde(rename = "questions")]
    Questions,
    #[serde(rename = "thesis")]
    Thesis,
    #[serde(rename = "search_boost")]
    SearchBoost,
    #[serde(rename = "query_match_1")]
    QueryMatch1,
    #[serde(rename = "query_match_2")]
    QueryMatch2,
    #[serde(rename = "query_match_3")]
    QueryMatch3,
}

impl FeatureName {
    /// Canonical order; also the row order inside the embedding store.
    pub const ALL: [FeatureName; 7] = [
        FeatureName::Keywords,
        FeatureName::Questions,
        FeatureName::Thesis,
        FeatureName::SearchBoost,
        FeatureName::QueryMatch1,
        FeatureName::QueryMatch2,
        FeatureName::QueryMatch3,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureName::Keywords => "keywords",
            FeatureName::Questions => "questions",
            FeatureName::Thesis => "thesis",
            FeatureName::SearchBoost => "search_boost",
            FeatureName::QueryMatch1 => "query_match_1",
            FeatureName::QueryMatch2 => "query_match_2",
            FeatureName::QueryMatch3 => "query_match_3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A finite vector of exactly [`EMBEDDING_DIM`] values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::Dimension(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; EMBEDDING_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Unit-length copy; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self(self.0.iter().map(|v| v / n).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, EmbeddingError> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector is zero.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0)
}

/// Maps text to a fixed-dimension vector.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError>;

    /// Identifies the model family; recorded in index manifests so queries
    /// are embedded the same way the corpus was.
    fn family(&self) -> String;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        (**self).embed(text)
    }

    fn family(&self) -> String {
        (**self).family()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        (**self).embed(text)
    }

    fn family(&self) -> String {
        (**self).family()
    }
}

/// The seven feature vectors of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceEmbeddings {
    pub device_id: String,
    vectors: [EmbeddingVector; 7],
    /// Features whose vector is all zeros.
    pub degenerate: Vec<FeatureName>,
}

impl DeviceEmbeddings {
    pub fn new(device_id: impl Into<String>, vectors: [EmbeddingVector; 7]) -> Self {
        let degenerate = FeatureName::ALL.into_iter().filter(|f| vectors[f.index()].is_zero()).collect();
        Self { device_id: device_id.into(), vectors, degenerate }
    }

    pub fn get(&self, feature: FeatureName) -> &EmbeddingVector {
        &self.vectors[feature.index()]
    }

    pub fn vectors(&self) -> &[EmbeddingVector; 7] {
        &self.vectors
    }
}

/// Embeds the seven features of one device, L2-normalizing each vector.
pub fn embed_device<P: EmbeddingProvider + ?Sized>(
    features: &FeatureSet,
    provider: &P,
) -> Result<DeviceEmbeddings, EmbeddingError> {
    let mut out = Vec::with_capacity(7);
    for feature in FeatureName::ALL {
        let v = provider.embed(&features.feature_text(feature)).map_err(|e| EmbeddingError::Feature {
            device_id: features.device_id.clone(),
            feature,
            source: Box::new(e),
        })?;
        out.push(v.normalized());
    }
    let vectors: [EmbeddingVector; 7] = out.try_into().expect("seven features");
    Ok(DeviceEmbeddings::new(features.device_id.clone(), vectors))
}
