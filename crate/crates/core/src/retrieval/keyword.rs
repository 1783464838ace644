use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::index::SearchIndex;
use crate::corpus::DeviceRecord;
use crate::extraction::FeatureSet;
use crate::text::tokenize;

/// How a query word must appear in a device snippet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordMode {
    /// Case-insensitive substring anywhere in the snippet.
    #[default]
    Substring,
    /// Every token of the word must be a whole snippet token.
    WholeWord,
}

/// Lowercased lookup text: id, name, company, thesis, keywords, concepts.
pub(crate) fn snippet(device: &DeviceRecord, features: &FeatureSet) -> String {
    [
        device.submission_id.as_str(),
        device.device_name.as_str(),
        device.company.as_str(),
        features.thesis.as_str(),
        &features.keywords.join(" "),
        &features.key_concepts.join(" "),
    ]
    .join(" ")
    .to_lowercase()
}

/// Devices whose snippet contains every whitespace-separated query word,
/// in corpus order. An empty query matches nothing.
pub fn keyword_search(index: &SearchIndex, query: &str) -> Vec<String> {
    keyword_search_with(index, query, index.config().keyword_mode)
}

pub fn keyword_search_with(index: &SearchIndex, query: &str, mode: KeywordMode) -> Vec<String> {
    let words: Vec<String> = query.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return Vec::new();
    }
    index
        .snippets()
        .iter()
        .zip(index.corpus().iter())
        .filter(|(snippet, _)| match mode {
            KeywordMode::Substring => words.iter().all(|w| snippet.contains(w.as_str())),
            KeywordMode::WholeWord => {
                let tokens: HashSet<String> = tokenize(snippet).into_iter().collect();
                words.iter().all(|w| {
                    let parts = tokenize(w);
                    !parts.is_empty() && parts.iter().all(|p| tokens.contains(p))
                })
            }
        })
        .map(|(_, d)| d.submission_id.clone())
        .collect()
}
