use std::hash::Hasher;

use fnv::FnvHasher;

use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector, EMBEDDING_DIM};
use crate::text::tokenize;

fn fnv(domain: &[u8], parts: &[&[u8]]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(domain);
    for p in parts {
        h.write_u8(0);
        h.write(p);
    }
    h.finish()
}

fn accumulate(acc: &mut [f64], parts: &[&[u8]]) {
    let bucket = (fnv(b"bucket", parts) % EMBEDDING_DIM as u64) as usize;
    let sign = if fnv(b"sign", parts) >> 63 == 0 { 1.0 } else { -1.0 };
    acc[bucket] += sign;
}

/// Feature-hashing embedding of unigrams and adjacent bigrams.
///
/// Each token and each adjacent token pair lands in one of 384 buckets
/// with a ±1 sign drawn from an independent hash. The result is
/// L2-normalized; text without tokens maps to the zero vector.
pub fn hash_embed(text: &str) -> EmbeddingVector {
    let tokens = tokenize(text);
    let mut acc = vec![0.0f64; EMBEDDING_DIM];
    for t in &tokens {
        accumulate(&mut acc, &[t.as_bytes()]);
    }
    for pair in tokens.windows(2) {
        accumulate(&mut acc, &[pair[0].as_bytes(), pair[1].as_bytes()]);
    }
    EmbeddingVector::new(acc).expect("finite by construction").normalized()
}

/// [`hash_embed`] behind the provider trait.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        Ok(hash_embed(text))
    }

    fn family(&self) -> String {
        "hash-fnv1a-uni-bi-v1".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine_similarity;
    use proptest::prelude::*;

    #[test]
    fn deterministic_and_case_insensitive() {
        assert_eq!(hash_embed("cardiac mri"), hash_embed("cardiac mri"));
        assert_eq!(hash_embed("Cardiac, MRI!"), hash_embed("cardiac mri"));
        assert_eq!(hash_embed("anything").as_slice().len(), EMBEDDING_DIM);
    }

    #[test]
    fn empty_is_zero() {
        assert!(hash_embed("").is_zero());
        assert!(hash_embed(" -- ").is_zero());
    }

    #[test]
    fn shared_tokens_beat_disjoint_tokens() {
        let base = hash_embed("cardiac mri segmentation");
        let near = cosine_similarity(&base, &hash_embed("cardiac mri"));
        let far = cosine_similarity(&base, &hash_embed("orthopedic insole"));
        assert!(near > far, "near {near} far {far}");
        // 3 of the 5 hashed items on the left are shared with the right.
        assert!(near > 0.5);
    }

    #[test]
    fn bigrams_distinguish_order() {
        assert_ne!(hash_embed("lung nodule"), hash_embed("nodule lung"));
    }

    proptest! {
        #[test]
        fn unit_norm_when_tokens_present(text in "[a-z]{1,8}( [a-z0-9]{1,8}){0,12}") {
            let v = hash_embed(&text);
            prop_assert!((v.norm() - 1.0).abs() <= 1e-9);
        }
    }
}
