#![allow(dead_code)]

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use devsearch::extraction::{ExtractOptions, MockProvider};
use devsearch::HashEmbedder;
use devsearch_service::api::{self, AppState, Loaded};
use devsearch_service::pipeline::{self, Workspace};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Runs ingest, mock extraction, hashing embeddings and indexing on the
/// bundled fixture.
pub fn fixture_workspace() -> (tempfile::TempDir, Workspace) {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path());
    let f = fixtures();
    pipeline::ingest(&ws, &f.join("devices.jsonl"), &f).unwrap();
    pipeline::extract(&ws, &MockProvider, &ExtractOptions::default()).unwrap();
    pipeline::embed(&ws, &HashEmbedder).unwrap();
    pipeline::index(&ws, None).unwrap();
    (dir, ws)
}

pub fn loaded(ws: &Workspace) -> Loaded {
    let (index, hash) = pipeline::load_index(ws).unwrap();
    Loaded::new(index, hash, Box::new(HashEmbedder))
}

pub fn app(ws: &Workspace) -> Router {
    api::router(AppState::ready(loaded(ws)), Some("*"))
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, serde_json::Value) {
    get_with(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn get_with(app: &Router, req: Request<Body>) -> (StatusCode, axum::http::HeaderMap, serde_json::Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let json = if bytes.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("invalid JSON from {status}: {e}: {bytes:?}"))
    };
    (status, headers, json)
}

/// Percent-encodes every byte that is not unreserved.
pub fn encode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}
