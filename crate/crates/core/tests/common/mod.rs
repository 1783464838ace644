#![allow(dead_code)]

use devsearch::embedding::embed_device;
use devsearch::retrieval::{build_index_with, IndexConfig};
use devsearch::{Corpus, DeviceRecord, FeatureSet, HashEmbedder, Pathway, SearchIndex};

pub fn device(id: &str, name: &str, company: &str) -> DeviceRecord {
    DeviceRecord {
        submission_id: id.into(),
        device_name: name.into(),
        company: company.into(),
        pathway: Pathway::FiveTenK,
        panel: "Radiology".into(),
        decision_date: None,
        summary_text: format!("{name} by {company}"),
    }
}

pub fn features(id: &str, keywords: &[&str], thesis: &str, concepts: &[&str]) -> FeatureSet {
    FeatureSet {
        device_id: id.into(),
        summary: thesis.into(),
        keywords: keywords.iter().map(|s| s.to_string()).collect(),
        key_concepts: concepts.iter().map(|s| s.to_string()).collect(),
        thesis: thesis.into(),
        ..FeatureSet::default()
    }
}

/// Hash-embedded index over hand-written records.
pub fn index(rows: Vec<(DeviceRecord, FeatureSet)>) -> SearchIndex {
    let (devices, features): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let embeddings = features.iter().map(|f| embed_device(f, &HashEmbedder).unwrap()).collect();
    let corpus = Corpus::new(devices, "test").unwrap();
    build_index_with(corpus, features, embeddings, IndexConfig::default()).unwrap()
}
