use std::sync::Mutex;

/// Failure reported by a completion provider.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    /// Network or service failure; worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The provider refused the request; retrying will not help.
    #[error("request rejected: {0}")]
    Rejected(String),
}

/// Synchronous LLM completion: one prompt, optionally with a document
/// appended, returns the model's text.
pub trait CompletionProvider: Send + Sync {
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for &P {
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError> {
        (**self).complete(prompt, attachment)
    }
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for Box<P> {
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError> {
        (**self).complete(prompt, attachment)
    }
}

/// Provider backed by a closure.
pub struct FnProvider<F>(pub F);

impl<F> CompletionProvider for FnProvider<F>
where
    F: Fn(&str, Option<&str>) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError> {
        (self.0)(prompt, attachment)
    }
}

/// Replays a fixed list of responses in order, then fails. Records every
/// prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    responses: Mutex<std::collections::VecDeque<Result<String, ProviderError>>>,
    calls: Mutex<Vec<(String, Option<String>)>>,
}

impl ScriptedProvider {
    pub fn new<I>(responses: I) -> Self
    where
        I: IntoIterator<Item = Result<String, ProviderError>>,
    {
        Self { responses: Mutex::new(responses.into_iter().collect()), calls: Mutex::new(Vec::new()) }
    }

    pub fn calls(&self) -> Vec<(String, Option<String>)> {
        self.calls.lock().unwrap().clone()
    }
}

impl CompletionProvider for ScriptedProvider {
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError> {
        self.calls.lock().unwrap().push((prompt.to_string(), attachment.map(str::to_string)));
        self.responses
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(ProviderError::Rejected("script exhausted".into())))
    }
}
