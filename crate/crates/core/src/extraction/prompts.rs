//! Prompt texts. Versioned; changing any of them changes extraction output.

pub const PROMPT_VERSION: &str = "v1";

pub const CHUNK_SUMMARY_PROMPT: &str = "Summarize the following chunk of a document in two paragraphs. Do NOT include anything about the document type (e.g., FDA 510(k) letter)";

/// Used only when a document was split into more than one chunk.
pub const AGGREGATE_SUMMARY_PROMPT: &str = "Combine the following summaries of consecutive chunks of one document into a single two-paragraph summary of the entire document. Do NOT include anything about the document type (e.g., FDA 510(k) letter)";

pub const FEATURE_PROMPT: &str = "Analyze the following summary of a document and provide:
1. A thorough two-paragraph summary that distills all relevant content about the device's purpose, methology, science, and results from the entire document.
2. Exactly 10 salient keywords from the entire document.
3. Exactly 5 insightful questions that a clinician or scientist might ask about the entire document to yield good results for further investigation or understanding.
4. Based on the keywords and generated questions, a list of 5 concepts pertaining to the entire document.
5. Based on all of the above, a 2 sentence thesis, a clear statement of purpose, methology, science of the device for the entire document.
Summary content:";

pub const QUERY_MATCH_PROMPT: &str = "Based on the following data for a medical device, please generate three distinct search queries that a clinician would use to find this device. The queries should be specific and relevant to the device's characteristics and intended use.";

pub const SIMULATED_QUERY_PREFIX: &str = "You are an expert medical researcher.";

/// Renders the simulated-query prompt for one device.
pub fn simulated_query_prompt(thesis: &str, concepts: &str) -> String {
    format!(
        "{SIMULATED_QUERY_PREFIX}
Based on the following thesis and key concepts from a medical device's FDA summary,
generate a concise and clinically relevant search query that a clinician or researcher might use to find information about similar devices or technologies. Do NOT include anything about AI, ML, or what those mean.
Only return the 1-3 word medical search query. Return only the query itself, without any preamble or explanation..
Thesis: \"{thesis}\"
Key Concepts: \"{concepts}\"
Clinically Relevant Search Query:"
    )
}
