//! Read-only JSON API over a loaded index.

use std::collections::hash_map::DefaultHasher;
use std::future::Future;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use devsearch::par::Execution;
use devsearch::retrieval::{keyword_search, search_with};
use devsearch::{DeviceRecord, EmbeddingProvider, FeatureSet, RetrievalWeights, SearchIndex};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const MAX_K: usize = 100;
pub const DEFAULT_K: usize = 10;
const SNIPPET_CHARS: usize = 280;

/// Everything a request needs, built once at startup.
pub struct Loaded {
    pub index: SearchIndex,
    pub manifest_hash: String,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub weights: RetrievalWeights,
}

impl Loaded {
    /// Uses the index's default weights.
    pub fn new(index: SearchIndex, manifest_hash: String, embedder: Box<dyn EmbeddingProvider>) -> Self {
        let weights = index.default_weights();
        Self { index, manifest_hash, embedder, weights }
    }
}

/// Shared handle; empty until the index finishes loading.
#[derive(Clone, Default)]
pub struct AppState {
    loaded: Arc<OnceLock<Loaded>>,
}

impl AppState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(loaded: Loaded) -> Self {
        let s = Self::default();
        s.set(loaded);
        s
    }

    /// Installs the index; later calls are ignored.
    pub fn set(&self, loaded: Loaded) {
        if self.loaded.set(loaded).is_err() {
            log::warn!("index already loaded; ignoring second load");
        }
    }

    pub fn is_ready(&self) -> bool {
        self.loaded.get().is_some()
    }

    fn get(&self) -> Result<&Loaded, ApiError> {
        self.loaded
            .get()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "loading", "index is still loading"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.into(), message: message.into() } }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut resp = (self.status, Json(ErrorEnvelope { error: self.body })).into_response();
        resp.headers_mut().insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
        resp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Semantic,
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub submission_id: String,
    pub device_name: String,
    pub company: String,
    pub pathway: String,
    /// Present in semantic mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub rank: usize,
    pub thesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub mode: Mode,
    pub results: Vec<SearchHit>,
    pub took_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceResponse {
    pub device: DeviceRecord,
    pub features: FeatureSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub corpus_size: usize,
    pub index_manifest_hash: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct SearchParams {
    q: Option<String>,
    k: Option<String>,
    mode: Option<String>,
}

/// Validated search request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchRequest {
    pub query: String,
    pub k: usize,
    pub mode: Mode,
}

impl SearchParams {
    fn validate(self) -> Result<SearchRequest, ApiError> {
        let query = self.q.unwrap_or_default().trim().to_string();
        if query.is_empty() {
            return Err(ApiError::bad_request("empty_query", "q must not be empty"));
        }
        let k =
            match self.k.as_deref().map(str::trim) {
                None | Some("") => DEFAULT_K,
                Some(raw) => raw.parse::<usize>().ok().filter(|k| (1..=MAX_K).contains(k)).ok_or_else(|| {
                    ApiError::bad_request("invalid_k", format!("k must be an integer in 1..={MAX_K}"))
                })?,
            };
        let mode = match self.mode.as_deref().map(str::trim) {
            None | Some("") | Some("semantic") => Mode::Semantic,
            Some("keyword") => Mode::Keyword,
            Some(other) => {
                return Err(ApiError::bad_request("invalid_mode", format!("unknown mode {other:?}")));
            }
        };
        Ok(SearchRequest { query, k, mode })
    }
}

fn snippet(text: &str) -> String {
    if text.chars().count() <= SNIPPET_CHARS {
        return text.to_string();
    }
    let cut: String = text.chars().take(SNIPPET_CHARS).collect();
    let cut = cut.rfind(' ').map_or(cut.as_str(), |i| &cut[..i]);
    format!("{}…", cut.trim_end())
}

fn hit(index: &SearchIndex, id: &str, rank: usize, score: Option<f64>) -> SearchHit {
    let device = index.corpus().get(id).expect("results come from the index");
    let thesis = index.features_of(id).map(|f| snippet(&f.thesis)).unwrap_or_default();
    SearchHit {
        submission_id: device.submission_id.clone(),
        device_name: device.device_name.clone(),
        company: device.company.clone(),
        pathway: device.pathway.to_string(),
        score,
        rank,
        thesis,
    }
}

/// Runs a validated request against the loaded index.
pub fn run_search(loaded: &Loaded, req: &SearchRequest) -> Result<Vec<SearchHit>, ApiError> {
    let index = &loaded.index;
    match req.mode {
        Mode::Semantic => {
            let ranked =
                search_with(index, &loaded.weights, &req.query, loaded.embedder.as_ref(), req.k, Execution::auto())
                    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "search_failed", e.to_string()))?;
            Ok(ranked.iter().map(|r| hit(index, &r.device_id, r.rank, Some(r.score))).collect())
        }
        Mode::Keyword => Ok(keyword_search(index, &req.query)
            .iter()
            .take(req.k)
            .enumerate()
            .map(|(i, id)| hit(index, id, i + 1, None))
            .collect()),
    }
}

fn etag(manifest_hash: &str, uri: &Uri) -> String {
    let mut h = DefaultHasher::new();
    uri.path().hash(&mut h);
    uri.query().unwrap_or("").hash(&mut h);
    let prefix = &manifest_hash[..manifest_hash.len().min(16)];
    format!("\"{prefix}-{:016x}\"", h.finish())
}

/// 304 when the client already holds this representation; otherwise the
/// body with cache headers.
fn cached<T: Serialize>(loaded: &Loaded, uri: &Uri, headers: &HeaderMap, body: T) -> Response {
    let tag = etag(&loaded.manifest_hash, uri);
    let fresh = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == tag || t.trim() == "*"));
    let mut resp = if fresh { StatusCode::NOT_MODIFIED.into_response() } else { Json(body).into_response() };
    let h = resp.headers_mut();
    h.insert(header::ETAG, HeaderValue::from_str(&tag).expect("ascii etag"));
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("public, max-age=300"));
    resp
}

async fn search_handler(
    State(state): State<AppState>,
    uri: Uri,
    headers: HeaderMap,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(params) = params.map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))?;
    let req = params.validate()?;
    state.get()?;
    let start = Instant::now();
    let worker = state.clone();
    let job = req.clone();
    let results = tokio::task::spawn_blocking(move || run_search(worker.get()?, &job))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "search_failed", e.to_string()))??;
    let body =
        SearchResponse { query: req.query, mode: req.mode, results, took_ms: start.elapsed().as_millis() as u64 };
    Ok(cached(state.get()?, &uri, &headers, body))
}

async fn device_handler(
    State(state): State<AppState>,
    uri: Uri,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let loaded = state.get()?;
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no device {id:?}"));
    let device = loaded.index.corpus().get(&id).ok_or_else(not_found)?.clone();
    let features = loaded.index.features_of(&id).ok_or_else(not_found)?.clone();
    Ok(cached(loaded, &uri, &headers, DeviceResponse { device, features }))
}

async fn health_handler(State(state): State<AppState>) -> Result<Response, ApiError> {
    let loaded = state.get()?;
    let body = HealthResponse {
        status: "ok".into(),
        corpus_size: loaded.index.len(),
        index_manifest_hash: loaded.manifest_hash.clone(),
    };
    let mut resp = Json(body).into_response();
    resp.headers_mut().insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    Ok(resp)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "only GET is supported")
}

/// `None` disables CORS; `"*"` allows any origin.
pub fn router(state: AppState, cors_origin: Option<&str>) -> Router {
    let app = Router::new()
        .route("/api/search", get(search_handler))
        .route("/api/devices/{submission_id}", get(device_handler))
        .route("/api/health", get(health_handler))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    match cors_origin {
        None => app,
        Some(origin) => {
            let allow = if origin == "*" {
                AllowOrigin::any()
            } else {
                match HeaderValue::from_str(origin) {
                    Ok(v) => AllowOrigin::exact(v),
                    Err(_) => {
                        log::warn!("ignoring invalid CORS origin {origin:?}");
                        return app;
                    }
                }
            };
            app.layer(CorsLayer::new().allow_origin(allow).allow_methods([Method::GET]).expose_headers([header::ETAG]))
        }
    }
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: Option<&str>, k: Option<&str>, mode: Option<&str>) -> SearchParams {
        SearchParams { q: q.map(Into::into), k: k.map(Into::into), mode: mode.map(Into::into) }
    }

    #[test]
    fn validation() {
        let ok = params(Some("  lung  "), None, None).validate().unwrap();
        assert_eq!(ok, SearchRequest { query: "lung".into(), k: 10, mode: Mode::Semantic });
        assert_eq!(params(Some("x"), Some("100"), Some("keyword")).validate().unwrap().k, 100);
        for (q, k, m, code) in [
            (None, None, None, "empty_query"),
            (Some("  "), None, None, "empty_query"),
            (Some("x"), Some("0"), None, "invalid_k"),
            (Some("x"), Some("101"), None, "invalid_k"),
            (Some("x"), Some("-3"), None, "invalid_k"),
            (Some("x"), Some("ten"), None, "invalid_k"),
            (Some("x"), None, Some("fuzzy"), "invalid_mode"),
        ] {
            assert_eq!(params(q, k, m).validate().unwrap_err().body.code, code);
        }
    }

    #[test]
    fn snippet_truncates_on_word_boundary() {
        assert_eq!(snippet("short"), "short");
        let long = "word ".repeat(100);
        let s = snippet(&long);
        assert!(s.ends_with('…'));
        assert!(s.chars().count() <= SNIPPET_CHARS + 1);
        assert!(!s.contains("wor…"));
    }

    #[test]
    fn etag_depends_on_query() {
        let a = etag("abcdef0123456789ff", &"/api/search?q=a".parse().unwrap());
        let b = etag("abcdef0123456789ff", &"/api/search?q=b".parse().unwrap());
        assert_ne!(a, b);
        assert!(a.starts_with("\"abcdef0123456789-"));
    }
}
