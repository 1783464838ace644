//! Device records, corpus ingestion and document chunking.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::jsonl::{read_jsonl, write_jsonl, JsonlError};

/// Roughly 200 pages at ~2,000 characters per page.
pub const DEFAULT_CHUNK_LIMIT: usize = 400_000;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("record on line {line} has an empty submission_id")]
    EmptyId { line: usize },
    #[error("duplicate submission_id {0}")]
    DuplicateId(String),
    #[error("device {id}: unknown pathway {value:?} (expected \"510k\", \"de_novo\" or \"pma\")")]
    UnknownPathway { id: String, value: String },
    #[error("device {0}: neither summary_text nor summary_path given")]
    MissingSummary(String),
}

/// Regulatory route under which a device was authorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pathway {
    #[serde(rename = "510k")]
    FiveTenK,
    #[serde(rename = "de_novo")]
    DeNovo,
    #[serde(rename = "pma")]
    Pma,
}

impl Pathway {
    pub fn as_str(self) -> &'static str {
        match self {
            Pathway::FiveTenK => "510k",
            Pathway::DeNovo => "de_novo",
            Pathway::Pma => "pma",
        }
    }
}

impl fmt::Display for Pathway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pathway {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "510k" => Ok(Pathway::FiveTenK),
            "de_novo" => Ok(Pathway::DeNovo),
            "pma" => Ok(Pathway::Pma),
            other => Err(other.to_string()),
        }
    }
}

/// One authorized device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub submission_id: String,
    pub device_name: String,
    pub company: String,
    pub pathway: Pathway,
    #[serde(default)]
    pub panel: String,
    #[serde(default)]
    pub decision_date: Option<NaiveDate>,
    pub summary_text: String,
}

/// Validated set of devices, ordered by `submission_id`.
#[derive(Debug, Clone)]
pub struct Corpus {
    devices: Vec<DeviceRecord>,
    version_tag: String,
    by_id: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.devices == other.devices && self.version_tag == other.version_tag
    }
}

impl Corpus {
    pub fn new(mut devices: Vec<DeviceRecord>, version_tag: impl Into<String>) -> Result<Self, CorpusError> {
        devices.sort_by(|a, b| a.submission_id.cmp(&b.submission_id));
        let mut by_id = HashMap::with_capacity(devices.len());
        for (i, d) in devices.iter().enumerate() {
            if d.submission_id.is_empty() {
                return Err(CorpusError::EmptyId { line: i + 1 });
            }
            if by_id.insert(d.submission_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(d.submission_id.clone()));
            }
        }
        Ok(Self { devices, version_tag: version_tag.into(), by_id })
    }

    pub fn devices(&self) -> &[DeviceRecord] {
        &self.devices
    }

    pub fn version_tag(&self) -> &str {
        &self.version_tag
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DeviceRecord> {
        self.by_id.get(id).map(|&i| &self.devices[i])
    }

    /// Position of `id` in iteration order.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DeviceRecord> {
        self.devices.iter()
    }

    /// Writes the corpus as JSONL with every summary inlined.
    pub fn save_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        Ok(write_jsonl(path, &self.devices)?)
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a DeviceRecord;
    type IntoIter = std::slice::Iter<'a, DeviceRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.devices.iter()
    }
}

#[derive(Debug, Deserialize)]
struct MetadataLine {
    submission_id: String,
    #[serde(default)]
    device_name: String,
    #[serde(default)]
    company: String,
    pathway: String,
    #[serde(default)]
    panel: Option<String>,
    #[serde(default)]
    decision_date: Option<NaiveDate>,
    #[serde(default)]
    summary_text: Option<String>,
    #[serde(default)]
    summary_path: Option<PathBuf>,
}

/// Loads a JSONL metadata file. Relative `summary_path` entries resolve
/// against `text_dir`. The version tag defaults to the metadata file stem.
pub fn load_corpus(metadata: &Path, text_dir: &Path) -> Result<Corpus, CorpusError> {
    let lines: Vec<MetadataLine> = read_jsonl(metadata)?;
    let mut devices = Vec::with_capacity(lines.len());
    for (i, line) in lines.into_iter().enumerate() {
        if line.submission_id.trim().is_empty() {
            return Err(CorpusError::EmptyId { line: i + 1 });
        }
        let pathway = line
            .pathway
            .parse::<Pathway>()
            .map_err(|value| CorpusError::UnknownPathway { id: line.submission_id.clone(), value })?;
        let summary_text = match (line.summary_text, line.summary_path) {
            (Some(text), _) => text,
            (None, Some(rel)) => {
                let path = if rel.is_absolute() { rel } else { text_dir.join(rel) };
                fs::read_to_string(&path).map_err(|source| CorpusError::Io { path, source })?
            }
            (None, None) => return Err(CorpusError::MissingSummary(line.submission_id)),
        };
        devices.push(DeviceRecord {
            submission_id: line.submission_id,
            device_name: line.device_name,
            company: line.company,
            pathway,
            panel: line.panel.unwrap_or_default(),
            decision_date: line.decision_date,
            summary_text,
        });
    }
    let tag = metadata.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Corpus::new(devices, tag)
}

/// A contiguous slice of a device's summary text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentChunk {
    pub device_id: String,
    pub chunk_index: usize,
    pub text: String,
}

/// Splits `text` into pieces of at most `limit` characters.
///
/// Each cut lands just after the last blank line inside the window when
/// there is one, otherwise exactly at the limit. Joining the chunks in
/// order gives back `text`.
///
/// # Panics
///
/// If `limit` is zero.
pub fn chunk_document(text: &str, limit: usize) -> Vec<String> {
    assert!(limit >= 1, "chunk limit must be at least 1");
    let mut chunks = Vec::new();
    let mut rest = text;
    loop {
        let Some((hard, _)) = rest.char_indices().nth(limit) else {
            chunks.push(rest.to_string());
            break;
        };
        let window = &rest[..hard];
        let cut = window.rfind("\n\n").map_or(hard, |p| p + 2);
        chunks.push(window[..cut].to_string());
        rest = &rest[cut..];
        if rest.is_empty() {
            break;
        }
    }
    chunks
}

/// [`chunk_document`] over a device's summary, tagged with the device id.
pub fn chunk_device(device: &DeviceRecord, limit: usize) -> Vec<DocumentChunk> {
    chunk_document(&device.summary_text, limit)
        .into_iter()
        .enumerate()
        .map(|(chunk_index, text)| DocumentChunk { device_id: device.submission_id.clone(), chunk_index, text })
        .collect()
}
