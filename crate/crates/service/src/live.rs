//! Blocking HTTP adapters for OpenAI-compatible chat and embedding
//! endpoints, configured from the environment.

use std::time::Duration;

use devsearch::embedding::{EmbeddingError, EmbeddingProvider, EmbeddingVector};
use devsearch::extraction::{CompletionProvider, ProviderError};
use serde_json::{json, Value};

pub const ENV_LLM_URL: &str = "DEVSEARCH_LLM_URL";
pub const ENV_LLM_MODEL: &str = "DEVSEARCH_LLM_MODEL";
pub const ENV_LLM_KEY: &str = "DEVSEARCH_LLM_KEY";
pub const ENV_EMBED_URL: &str = "DEVSEARCH_EMBED_URL";
pub const ENV_EMBED_MODEL: &str = "DEVSEARCH_EMBED_MODEL";
pub const ENV_EMBED_KEY: &str = "DEVSEARCH_EMBED_KEY";

#[derive(Debug, thiserror::Error)]
#[error("environment variable {0} is not set")]
pub struct MissingEnv(pub &'static str);

fn env(name: &'static str) -> Result<String, MissingEnv> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty()).ok_or(MissingEnv(name))
}

#[derive(Debug, Clone)]
struct Endpoint {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl Endpoint {
    fn new(base_url: String, model: String, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { base_url: base_url.trim_end_matches('/').to_string(), model, api_key, agent }
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let url = format!("{}/{path}", self.base_url);
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(mut resp) => resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| ProviderError::Transport(format!("{url}: bad body: {e}"))),
            Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                Err(ProviderError::Transport(format!("{url}: HTTP {code}")))
            }
            Err(ureq::Error::StatusCode(code)) => Err(ProviderError::Rejected(format!("{url}: HTTP {code}"))),
            Err(e) => Err(ProviderError::Transport(format!("{url}: {e}"))),
        }
    }
}

/// Chat-completions client. The attachment is sent after the prompt in the
/// same user message.
#[derive(Debug, Clone)]
pub struct LiveChat {
    endpoint: Endpoint,
}

impl LiveChat {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        Self { endpoint: Endpoint::new(base_url.into(), model.into(), api_key, Duration::from_secs(300)) }
    }

    pub fn from_env() -> Result<Self, MissingEnv> {
        Ok(Self::new(env(ENV_LLM_URL)?, env(ENV_LLM_MODEL)?, env(ENV_LLM_KEY).ok()))
    }
}

impl CompletionProvider for LiveChat {
    fn complete(&self, prompt: &str, attachment: Option<&str>) -> Result<String, ProviderError> {
        let content = match attachment {
            Some(doc) => format!("{prompt}\n\n{doc}"),
            None => prompt.to_string(),
        };
        let body = json!({
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        });
        let v = self.endpoint.post("chat/completions", &body)?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Rejected("response has no message content".into()))
    }
}

/// Embeddings client; responses must carry 384-dimensional vectors.
#[derive(Debug, Clone)]
pub struct LiveEmbedder {
    endpoint: Endpoint,
}

impl LiveEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        Self { endpoint: Endpoint::new(base_url.into(), model.into(), api_key, Duration::from_secs(60)) }
    }

    pub fn from_env() -> Result<Self, MissingEnv> {
        Ok(Self::new(env(ENV_EMBED_URL)?, env(ENV_EMBED_MODEL)?, env(ENV_EMBED_KEY).ok()))
    }
}

pub fn live_family(model: &str) -> String {
    format!("http:{model}")
}

impl EmbeddingProvider for LiveEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let body = json!({"model": self.endpoint.model, "input": text});
        let v = self.endpoint.post("embeddings", &body).map_err(|e| EmbeddingError::Provider(e.to_string()))?;
        let values: Vec<f64> = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| EmbeddingError::Provider("response has no embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| EmbeddingError::Provider("non-numeric embedding value".into())))
            .collect::<Result<_, _>>()?;
        // rejects anything but 384 dimensions
        EmbeddingVector::new(values)
    }

    fn family(&self) -> String {
        live_family(&self.endpoint.model)
    }
}
