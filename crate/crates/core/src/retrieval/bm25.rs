use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Corpus statistics for BM25, one document per device in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Stats {
    pub params: Bm25Params,
    pub n_docs: usize,
    pub avg_len: f64,
    pub doc_len: Vec<usize>,
    pub doc_freq: BTreeMap<String, usize>,
    pub term_freq: Vec<BTreeMap<String, u32>>,
}

impl Bm25Stats {
    pub fn build<D: AsRef<[String]>>(docs: &[D], params: Bm25Params) -> Self {
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        let mut term_freq = Vec::with_capacity(docs.len());
        let mut doc_len = Vec::with_capacity(docs.len());
        for doc in docs {
            let tokens = doc.as_ref();
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            doc_len.push(tokens.len());
            term_freq.push(tf);
        }
        let avg_len = if docs.is_empty() { 0.0 } else { doc_len.iter().sum::<usize>() as f64 / docs.len() as f64 };
        Self { params, n_docs: docs.len(), avg_len, doc_len, doc_freq, term_freq }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (self.n_docs as f64 - df + 0.5) / (df + 0.5)).ln()
    }

    /// Score of document `doc`. Every query token occurrence contributes,
    /// so a repeated query term counts repeatedly.
    pub fn score(&self, doc: usize, query: &[String]) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf_map = &self.term_freq[doc];
        let len_norm = 1.0 - b + b * self.doc_len[doc] as f64 / self.avg_len;
        query
            .iter()
            .map(|t| match tf_map.get(t) {
                Some(&tf) => {
                    let tf = tf as f64;
                    self.idf(t) * tf * (k1 + 1.0) / (tf + k1 * len_norm)
                }
                None => 0.0,
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn stats(docs: &[&str]) -> Bm25Stats {
        let docs: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d)).collect();
        Bm25Stats::build(&docs, Bm25Params::default())
    }

    #[test]
    fn lengths_and_frequencies() {
        let s = stats(&["a b c d", "a b c d e f", "cardiac a b c d e f cardiac"]);
        assert_eq!(s.avg_len, 6.0);
        assert_eq!(s.doc_freq["cardiac"], 1);
        assert_eq!(s.term_freq[2]["cardiac"], 2);
        let s = stats(&["cardiac mri", "lung", "cardiac echo"]);
        assert_eq!(s.doc_freq["cardiac"], 2);
    }

    #[test]
    fn three_doc_reference_value() {
        // N=3, df=2, f=1, |d|=3, lengths 3, 3, 2 so avg = 8/3; idf = ln 1.6
        let s = stats(&["cardiac mri segmentation", "lung ct nodule", "cardiac ultrasound"]);
        let expected = 1.6f64.ln() * 1.0 * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * 3.0 / (8.0 / 3.0)));
        let got = s.score(0, &["cardiac".to_string()]);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.447_138_587_822_970).abs() < 1e-9, "{got}");
    }

    #[test]
    fn zero_cases() {
        let s = stats(&["cardiac mri", "lung ct"]);
        assert_eq!(s.score(0, &[]), 0.0);
        assert_eq!(s.score(0, &["knee".to_string()]), 0.0);
        assert_eq!(s.score(1, &["cardiac".to_string()]), 0.0);
    }

    #[test]
    fn empty_docs_do_not_divide_by_zero() {
        let s = stats(&["", ""]);
        assert_eq!(s.avg_len, 0.0);
        assert_eq!(s.score(0, &["x".to_string()]), 0.0);
    }
}
