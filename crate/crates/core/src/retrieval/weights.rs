use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::embedding::FeatureName;

/// Box each feature weight is constrained to.
pub const WEIGHT_RANGE: RangeInclusive<f64> = 0.01..=0.5;

/// Tuned feature weights shipped as defaults, in [`FeatureName::ALL`] order.
pub const DEFAULT_WEIGHTS: [f64; 7] = [0.134207, 0.226103, 0.094972, 0.029563, 0.217395, 0.241111, 0.056650];

pub const DEFAULT_LAMBDA: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightError {
    #[error("weight for {feature} is {value}, outside [0.01, 0.5]")]
    OutOfRange { feature: FeatureName, value: f64 },
    #[error("lambda {0} outside [0, 1]")]
    Lambda(f64),
    #[error("missing weight for {0}")]
    Missing(FeatureName),
}

/// Per-feature embedding weights and the embedding/BM25 blend λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalWeights {
    weights: [f64; 7],
    lambda: f64,
}

impl RetrievalWeights {
    pub fn new(weights: [f64; 7], lambda: f64) -> Result<Self, WeightError> {
        for (feature, &value) in FeatureName::ALL.iter().zip(&weights) {
            if !WEIGHT_RANGE.contains(&value) {
                return Err(WeightError::OutOfRange { feature: *feature, value });
            }
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(WeightError::Lambda(lambda));
        }
        Ok(Self { weights, lambda })
    }

    /// Equal weights at the top of the range.
    pub fn uniform(lambda: f64) -> Result<Self, WeightError> {
        Self::new([0.5; 7], lambda)
    }

    pub fn weights(&self) -> &[f64; 7] {
        &self.weights
    }

    pub fn weight(&self, feature: FeatureName) -> f64 {
        self.weights[feature.index()]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self, WeightError> {
        Self::new(self.weights, lambda)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        Self { weights: DEFAULT_WEIGHTS, lambda: DEFAULT_LAMBDA }
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    weights: BTreeMap<FeatureName, f64>,
    lambda: f64,
}

impl Serialize for RetrievalWeights {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let weights = FeatureName::ALL.iter().map(|&f| (f, self.weight(f))).collect();
        Repr { weights, lambda: self.lambda }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RetrievalWeights {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = Repr::deserialize(d)?;
        let mut weights = [0.0; 7];
        for f in FeatureName::ALL {
            weights[f.index()] =
                *repr.weights.get(&f).ok_or_else(|| serde::de::Error::custom(WeightError::Missing(f)))?;
        }
        RetrievalWeights::new(weights, repr.lambda).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_tuned_values() {
        let w = RetrievalWeights::default();
        assert_eq!(w.weight(FeatureName::Keywords), 0.134207);
        assert_eq!(w.weight(FeatureName::QueryMatch2), 0.241111);
        assert_eq!(w.lambda(), 0.8);
        assert!((w.sum() - 1.000001).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(RetrievalWeights::new([0.6; 7], 0.5).is_err());
        assert!(RetrievalWeights::new([0.005; 7], 0.5).is_err());
        assert_eq!(RetrievalWeights::new([0.1; 7], 1.5), Err(WeightError::Lambda(1.5)));
        assert!(RetrievalWeights::new([0.01; 7], 0.0).is_ok());
    }

    #[test]
    fn json_shape() {
        let w = RetrievalWeights::default();
        let v: serde_json::Value = serde_json::to_value(w).unwrap();
        assert_eq!(v["weights"]["query_match_3"], 0.05665);
        assert_eq!(v["lambda"], 0.8);
        let back: RetrievalWeights = serde_json::from_value(v).unwrap();
        assert_eq!(back, w);
        let bad = serde_json::json!({"weights": {"keywords": 0.1}, "lambda": 0.5});
        assert!(serde_json::from_value::<RetrievalWeights>(bad).is_err());
    }
}
