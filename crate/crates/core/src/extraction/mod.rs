//! LLM feature extraction.
//!
//! [`extract_features`] runs the prompt chain for one device: a summary per
//! chunk, an aggregate summary when there is more than one chunk, the
//! five-feature prompt on that summary, the locally derived search boost,
//! and finally three generated query-match strings.

mod mock;
mod parse;
pub mod prompts;
mod provider;
mod query;

use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{chunk_document, DeviceRecord, DEFAULT_CHUNK_LIMIT};
use crate::embedding::FeatureName;
use crate::jsonl::{read_jsonl, write_jsonl, JsonlError};

pub use mock::MockProvider;
pub use parse::{
    parse_feature_response, parse_feature_response_with, parse_query_matches, ParseError, ParsedFeatures, Section,
};
pub use provider::{CompletionProvider, FnProvider, ProviderError, ScriptedProvider};
pub use query::{generate_simulated_query, KeywordFallback, PromptedQueries, SimulatedQueryProvider};

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error("device {0} has no summary text")]
    EmptyDocument(String),
    #[error("device {device_id}: provider call failed")]
    Provider {
        device_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("device {device_id}: unparseable response ({reason})")]
    Unparseable {
        device_id: String,
        reason: ParseError,
        /// Last raw provider response, kept for audit.
        raw: String,
    },
    #[error("device {device_id}: missing {what}")]
    MissingInput { device_id: String, what: &'static str },
    #[error("device {0}: empty generated query")]
    EmptyQuery(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// Extracted and generated text features of one device.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureSet {
    pub device_id: String,
    pub summary: String,
    pub keywords: Vec<String>,
    pub questions: Vec<String>,
    pub key_concepts: Vec<String>,
    pub thesis: String,
    pub search_boost: String,
    pub query_match_1: String,
    pub query_match_2: String,
    pub query_match_3: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Company name, device name and keywords, space separated.
pub fn search_boost(company: &str, device_name: &str, keywords: &[String]) -> String {
    let mut out = format!("{company} {device_name}");
    for k in keywords {
        out.push(' ');
        out.push_str(k);
    }
    out
}

impl FeatureSet {
    /// Text that is embedded for `feature`; list features join with `"; "`.
    pub fn feature_text(&self, feature: FeatureName) -> String {
        match feature {
            FeatureName::Keywords => self.keywords.join("; "),
            FeatureName::Questions => self.questions.join("; "),
            FeatureName::Thesis => self.thesis.clone(),
            FeatureName::SearchBoost => self.search_boost.clone(),
            FeatureName::QueryMatch1 => self.query_match_1.clone(),
            FeatureName::QueryMatch2 => self.query_match_2.clone(),
            FeatureName::QueryMatch3 => self.query_match_3.clone(),
        }
    }

    /// BM25 document: keywords, questions, thesis, key concepts and search
    /// boost, space joined.
    pub fn bm25_document(&self) -> String {
        [
            self.keywords.join(" "),
            self.questions.join(" "),
            self.thesis.clone(),
            self.key_concepts.join(" "),
            self.search_boost.clone(),
        ]
        .join(" ")
    }

    /// The five extracted features as the JSON object sent with the
    /// query-match prompt.
    pub fn extracted_json(&self) -> String {
        serde_json::json!({
            "summary": self.summary,
            "keywords": self.keywords,
            "questions": self.questions,
            "key_concepts": self.key_concepts,
            "thesis": self.thesis,
        })
        .to_string()
    }
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureSet>, ExtractionError> {
    Ok(read_jsonl(path)?)
}

pub fn write_features(path: &Path, features: &[FeatureSet]) -> Result<(), ExtractionError> {
    Ok(write_jsonl(path, features)?)
}

/// Attempts per provider call and the backoff applied after transport
/// failures. Unparseable responses are re-requested without waiting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self { attempts, initial_backoff: Duration::ZERO }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    pub chunk_limit: usize,
    pub retry: RetryPolicy,
    /// Reject count deviations instead of recording warnings.
    pub strict: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { chunk_limit: DEFAULT_CHUNK_LIMIT, retry: RetryPolicy::default(), strict: false }
    }
}

fn call<P, T, F>(
    provider: &P,
    device_id: &str,
    prompt: &str,
    attachment: &str,
    retry: RetryPolicy,
    parse: F,
) -> Result<T, ExtractionError>
where
    P: CompletionProvider + ?Sized,
    F: Fn(&str) -> Result<T, ParseError>,
{
    let attempts = retry.attempts.max(1);
    let mut backoff = retry.initial_backoff;
    let mut last: Option<ExtractionError> = None;
    for attempt in 1..=attempts {
        match provider.complete(prompt, Some(attachment)) {
            Ok(raw) => match parse(&raw) {
                Ok(v) => return Ok(v),
                Err(reason) => {
                    log::warn!("{device_id}: attempt {attempt}/{attempts} unparseable: {reason}");
                    last = Some(ExtractionError::Unparseable { device_id: device_id.to_string(), reason, raw });
                }
            },
            Err(e @ ProviderError::Transport(_)) => {
                log::warn!("{device_id}: attempt {attempt}/{attempts}: {e}");
                last = Some(ExtractionError::Provider { device_id: device_id.to_string(), source: e });
                if attempt < attempts && !backoff.is_zero() {
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
            Err(e) => return Err(ExtractionError::Provider { device_id: device_id.to_string(), source: e }),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn non_empty(raw: &str) -> Result<String, ParseError> {
    let t = raw.trim();
    if t.is_empty() {
        Err(ParseError::Empty)
    } else {
        Ok(t.to_string())
    }
}

/// Runs the full extraction chain for one device.
pub fn extract_features<P: CompletionProvider + ?Sized>(
    device: &DeviceRecord,
    provider: &P,
    options: &ExtractOptions,
) -> Result<FeatureSet, ExtractionError> {
    let id = device.submission_id.as_str();
    if device.summary_text.trim().is_empty() {
        return Err(ExtractionError::EmptyDocument(id.to_string()));
    }
    let chunks = chunk_document(&device.summary_text, options.chunk_limit);
    let mut chunk_summaries = Vec::with_capacity(chunks.len());
    for chunk in &chunks {
        chunk_summaries.push(call(provider, id, prompts::CHUNK_SUMMARY_PROMPT, chunk, options.retry, non_empty)?);
    }
    let aggregate = if chunk_summaries.len() > 1 {
        call(provider, id, prompts::AGGREGATE_SUMMARY_PROMPT, &chunk_summaries.join("\n\n"), options.retry, non_empty)?
    } else {
        chunk_summaries.pop().expect("one chunk")
    };

    let strict = options.strict;
    let parsed = call(provider, id, prompts::FEATURE_PROMPT, &aggregate, options.retry, |raw| {
        parse_feature_response_with(raw, strict)
    })?;

    let mut features = FeatureSet {
        device_id: id.to_string(),
        search_boost: search_boost(&device.company, &device.device_name, &parsed.keywords),
        summary: parsed.summary,
        keywords: parsed.keywords,
        questions: parsed.questions,
        key_concepts: parsed.key_concepts,
        thesis: parsed.thesis,
        warnings: parsed.warnings,
        ..FeatureSet::default()
    };
    let [q1, q2, q3] = call(
        provider,
        id,
        prompts::QUERY_MATCH_PROMPT,
        &features.extracted_json(),
        options.retry,
        parse_query_matches,
    )?;
    features.query_match_1 = q1;
    features.query_match_2 = q2;
    features.query_match_3 = q3;
    Ok(features)
}
