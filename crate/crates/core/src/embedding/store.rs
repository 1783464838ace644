//! Binary embedding store.
//!
//! `embeddings.bin` holds little-endian `f32` values laid out row-major as
//! `[device][feature][dim]`; `embeddings.json` maps each 384-value row to
//! its device id and feature name.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DeviceEmbeddings, EmbeddingVector, FeatureName, EMBEDDING_DIM};

pub const STORE_BIN: &str = "embeddings.bin";
pub const STORE_SIDECAR: &str = "embeddings.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid sidecar {path}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("embedding store is inconsistent: {0}")]
    Layout(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    dtype: String,
    rows: Vec<RowRef>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RowRef {
    row: usize,
    device_id: String,
    feature: FeatureName,
}

pub fn save_store(dir: &Path, embeddings: &[DeviceEmbeddings]) -> Result<(), StoreError> {
    let mut bytes = Vec::with_capacity(embeddings.len() * 7 * EMBEDDING_DIM * 4);
    let mut rows = Vec::with_capacity(embeddings.len() * 7);
    for dev in embeddings {
        for feature in FeatureName::ALL {
            for &v in dev.get(feature).as_slice() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            rows.push(RowRef { row: rows.len(), device_id: dev.device_id.clone(), feature });
        }
    }
    let sidecar = Sidecar { dim: EMBEDDING_DIM, dtype: "f32le".into(), rows };
    fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.to_path_buf(), source })?;
    let bin = dir.join(STORE_BIN);
    fs::write(&bin, bytes).map_err(|source| StoreError::Io { path: bin, source })?;
    let meta = dir.join(STORE_SIDECAR);
    let json = serde_json::to_vec_pretty(&sidecar).map_err(|source| StoreError::Json { path: meta.clone(), source })?;
    fs::write(&meta, json).map_err(|source| StoreError::Io { path: meta, source })
}

pub fn load_store(dir: &Path) -> Result<Vec<DeviceEmbeddings>, StoreError> {
    let meta = dir.join(STORE_SIDECAR);
    let raw = fs::read(&meta).map_err(|source| StoreError::Io { path: meta.clone(), source })?;
    let sidecar: Sidecar = serde_json::from_slice(&raw).map_err(|source| StoreError::Json { path: meta, source })?;
    if sidecar.dim != EMBEDDING_DIM || sidecar.dtype != "f32le" {
        return Err(StoreError::Layout(format!(
            "expected dim {EMBEDDING_DIM} f32le, found dim {} {}",
            sidecar.dim, sidecar.dtype
        )));
    }
    let bin = dir.join(STORE_BIN);
    let bytes = fs::read(&bin).map_err(|source| StoreError::Io { path: bin, source })?;
    let row_bytes = EMBEDDING_DIM * 4;
    if bytes.len() != sidecar.rows.len() * row_bytes {
        return Err(StoreError::Layout(format!(
            "{} rows declared but binary holds {} bytes",
            sidecar.rows.len(),
            bytes.len()
        )));
    }
    if !sidecar.rows.len().is_multiple_of(7) {
        return Err(StoreError::Layout("row count is not a multiple of 7".into()));
    }

    let mut out = Vec::with_capacity(sidecar.rows.len() / 7);
    for (group, refs) in sidecar.rows.chunks(7).enumerate() {
        let device_id = &refs[0].device_id;
        let mut vectors = Vec::with_capacity(7);
        for (expected, r) in FeatureName::ALL.into_iter().zip(refs) {
            if r.row != group * 7 + expected.index() || r.feature != expected || &r.device_id != device_id {
                return Err(StoreError::Layout(format!(
                    "row {} ({} / {}) out of canonical order",
                    r.row, r.device_id, r.feature
                )));
            }
            let start = r.row * row_bytes;
            let values = bytes[start..start + row_bytes]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            vectors.push(EmbeddingVector::new(values).map_err(|e| StoreError::Layout(format!("row {}: {e}", r.row)))?);
        }
        let vectors: [EmbeddingVector; 7] = vectors.try_into().expect("seven rows");
        out.push(DeviceEmbeddings::new(device_id.clone(), vectors));
    }
    Ok(out)
}
