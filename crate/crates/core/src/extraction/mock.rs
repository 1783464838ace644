//! Deterministic provider that needs no LLM.
//!
//! Answers each known prompt extractively from the attached text: leading
//! sentences become summaries and theses, the most frequent content words
//! become keywords. Lets the pipeline run offline.

use std::collections::HashMap;

use super::prompts::{
    AGGREGATE_SUMMARY_PROMPT, CHUNK_SUMMARY_PROMPT, FEATURE_PROMPT, QUERY_MATCH_PROMPT, SIMULATED_QUERY_PREFIX,
};
use super::provider::{CompletionProvider, ProviderError};
use crate::text::tokenize;

const STOPWORDS: &[&str] = &[
    "about", "after", "also", "among", "and", "any", "are", "based", "been", "before", "being", "between", "both",
    "but", "can", "could", "device", "does", "during", "each", "for", "from", "had", "has", "have", "into", "its",
    "may", "more", "most", "not", "other", "over", "such", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "through", "under", "used", "uses", "using", "was", "were", "when", "where",
    "which", "while", "who", "will", "with", "within", "without", "would", "you", "your",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct MockProvider;

fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            if !cur.trim().is_empty() && chars.get(i + 1) == Some(&'\n') {
                out.push(cur.trim().to_string());
                cur.clear();
            } else {
                cur.push(' ');
            }
            continue;
        }
        cur.push(c);
        let next = chars.get(i + 1);
        if matches!(c, '.' | '?' | '!') && next.is_none_or(|n| n.is_whitespace()) {
            out.push(cur.trim().to_string());
            cur.clear();
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out.retain(|s| !s.is_empty());
    out
}

fn summarize(text: &str) -> String {
    let s = sentences(text);
    let first: Vec<&str> = s.iter().take(3).map(String::as_str).collect();
    let second: Vec<&str> = s.iter().skip(3).take(3).map(String::as_str).collect();
    if second.is_empty() {
        first.join(" ")
    } else {
        format!("{}\n\n{}", first.join(" "), second.join(" "))
    }
}

/// Top content words by frequency, ties broken by first occurrence.
pub(crate) fn top_terms(text: &str, n: usize) -> Vec<String> {
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (pos, tok) in tokenize(text).into_iter().enumerate() {
        if tok.chars().count() < 3 || tok.chars().all(|c| c.is_ascii_digit()) || STOPWORDS.contains(&tok.as_str()) {
            continue;
        }
        counts.entry(tok).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(String, usize, usize)> = counts.into_iter().map(|(t, (c, p))| (t, c, p)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.into_iter().take(n).map(|(t, _, _)| t).collect()
}

fn pick(terms: &[String], i: usize) -> &str {
    if terms.is_empty() {
        "device"
    } else {
        &terms[i % terms.len()]
    }
}

fn feature_response(summary: &str) -> String {
    let kw = top_terms(summary, 10);
    let questions = [
        format!("What clinical problem does {} address?", pick(&kw, 0)),
        format!("How was {} performance validated?", pick(&kw, 1)),
        format!("Which patients benefit from {} analysis?", pick(&kw, 2)),
        format!("What inputs does the {} workflow require?", pick(&kw, 3)),
        format!("How does {} compare with standard practice?", pick(&kw, 4)),
    ];
    let concepts: Vec<String> = (0..5).map(|i| format!("{} {}", pick(&kw, 2 * i), pick(&kw, 2 * i + 1))).collect();
    let thesis = sentences(summary).into_iter().take(2).collect::<Vec<_>>().join(" ");
    let bullets = |items: &[String]| items.iter().map(|i| format!("- {i}\n")).collect::<String>();
    format!(
        "1. Summary:\n{summary}\n\n2. Keywords:\n{}\n3. Questions:\n{}\n4. Key concepts:\n{}\n5. Thesis:\n{thesis}\n",
        bullets(&kw),
        bullets(&questions),
        bullets(&concepts),
    )
}

fn query_matches(json: &str) -> Result<String, ProviderError> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(|e| ProviderError::Rejected(e.to_string()))?;
    let list = |key: &str| -> Vec<String> {
        value[key]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    };
    let kw = list("keywords");
    let concepts = list("key_concepts");
    Ok(format!(
        "1. {} {}\n2. {} {} {}\n3. {}\n",
        pick(&kw, 0),
        pick(&kw, 1),
        pick(&kw, 2),
        pick(&kw, 3),
        pick(&kw, 4),
        concepts.first().map_or_else(|| pick(&kw, 5).to_string(), Clone::clone),
    ))
}

fn simulated_query(prompt: &str) -> String {
    let concepts = prompt.lines().find_map(|l| l.strip_prefix("Key Concepts: ")).unwrap_or("").trim_matches('"');
    concepts.split(',').next().unwrap_or("").trim().to_string()
}

impl CompletionProvider for MockProvider {
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError> {
        let doc = attachment.unwrap_or("");
        if prompt == CHUNK_SUMMARY_PROMPT || prompt == AGGREGATE_SUMMARY_PROMPT {
            Ok(summarize(doc))
        } else if prompt == FEATURE_PROMPT {
            Ok(feature_response(doc))
        } else if prompt == QUERY_MATCH_PROMPT {
            query_matches(doc)
        } else if prompt.starts_with(SIMULATED_QUERY_PREFIX) {
            Ok(simulated_query(prompt))
        } else {
            Err(ProviderError::Rejected("unrecognized prompt".into()))
        }
    }
}
