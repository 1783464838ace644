use super::parse::strip_quotes;
use super::prompts::simulated_query_prompt;
use super::{CompletionProvider, ExtractionError, FeatureSet};

/// Produces a short clinical search query for a device, used as tuning
/// ground truth.
pub trait SimulatedQueryProvider: Send + Sync {
    fn generate(&self, features: &FeatureSet) -> Result<String, ExtractionError>;
}

/// Asks an LLM for a simulated query from the device thesis and concepts.
/// The reply is trimmed and unquoted; no word cap is enforced.
pub fn generate_simulated_query<P: CompletionProvider + ?Sized>(
    features: &FeatureSet,
    provider: &P,
) -> Result<String, ExtractionError> {
    if features.thesis.trim().is_empty() || features.key_concepts.is_empty() {
        return Err(ExtractionError::MissingInput {
            device_id: features.device_id.clone(),
            what: "thesis and key concepts",
        });
    }
    let prompt = simulated_query_prompt(&features.thesis, &features.key_concepts.join(", "));
    let raw = provider
        .complete(&prompt, None)
        .map_err(|e| ExtractionError::Provider { device_id: features.device_id.clone(), source: e })?;
    let query = strip_quotes(raw.trim());
    if query.is_empty() {
        return Err(ExtractionError::EmptyQuery(features.device_id.clone()));
    }
    Ok(query.to_string())
}

/// [`generate_simulated_query`] over a completion provider.
pub struct PromptedQueries<P>(pub P);

impl<P: CompletionProvider> SimulatedQueryProvider for PromptedQueries<P> {
    fn generate(&self, features: &FeatureSet) -> Result<String, ExtractionError> {
        generate_simulated_query(features, &self.0)
    }
}

/// Offline fallback: the first two keywords joined by a space.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordFallback;

impl SimulatedQueryProvider for KeywordFallback {
    fn generate(&self, features: &FeatureSet) -> Result<String, ExtractionError> {
        let query = features.keywords.iter().take(2).map(String::as_str).collect::<Vec<_>>().join(" ");
        if query.trim().is_empty() {
            return Err(ExtractionError::EmptyQuery(features.device_id.clone()));
        }
        Ok(query)
    }
}

impl<Q: SimulatedQueryProvider + ?Sized> SimulatedQueryProvider for &Q {
    fn generate(&self, features: &FeatureSet) -> Result<String, ExtractionError> {
        (**self).generate(features)
    }
}

impl<Q: SimulatedQueryProvider + ?Sized> SimulatedQueryProvider for Box<Q> {
    fn generate(&self, features: &FeatureSet) -> Result<String, ExtractionError> {
        (**self).generate(features)
    }
}
