//! Record/replay cassettes: JSONL files of hashed request/response pairs.
//! Replay resolves each call by the stable request hash and never falls
//! back to a live backend, so replayed runs are bit-reproducible and fully
//! offline.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{request_hash, BackendError, ChatBackend, ChatMessage, GenerationParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub hash: String,
    pub request: CassetteRequest,
    pub response: String,
    /// Unix seconds at record time; 0 under deterministic recording.
    pub timestamp: u64,
}

pub fn read_cassette(path: &Path) -> Result<Vec<CassetteEntry>, BackendError> {
    let file = File::open(path).map_err(|e| {
        BackendError::Cassette(format!("cannot open {}: {e}", path.display()))
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line =
            line.map_err(|e| BackendError::Cassette(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| {
            BackendError::Cassette(format!("{} line {}: {e}", path.display(), lineno + 1))
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Wraps a live backend and appends every request/response to a JSONL
/// cassette. Appends are serialized through a mutex so concurrent sessions
/// can share one recorder.
pub struct CassetteRecorder<B> {
    inner: B,
    file: Mutex<File>,
    path: PathBuf,
    deterministic: bool,
}

impl<B: ChatBackend> CassetteRecorder<B> {
    pub fn create(
        inner: B,
        path: impl AsRef<Path>,
        deterministic: bool,
    ) -> Result<CassetteRecorder<B>, BackendError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| {
                BackendError::Cassette(format!("cannot open {}: {e}", path.display()))
            })?;
        Ok(CassetteRecorder {
            inner,
            file: Mutex::new(file),
            path,
            deterministic,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<B: ChatBackend> ChatBackend for CassetteRecorder<B> {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        let response = self.inner.chat(messages, params)?;
        let entry = CassetteEntry {
            hash: request_hash(&self.inner.model_id(), messages, params),
            request: CassetteRequest {
                model: self.inner.model_id(),
                messages: messages.to_vec(),
                params: params.clone(),
            },
            response: response.clone(),
            timestamp: if self.deterministic {
                0
            } else {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            },
        };
        let line = serde_json::to_string(&entry).expect("cassette entry serializes");
        let mut file = self.file.lock().expect("cassette lock");
        writeln!(file, "{line}").map_err(|e| {
            BackendError::Cassette(format!("write to {}: {e}", self.path.display()))
        })?;
        Ok(response)
    }

    fn model_id(&self) -> String {
        self.inner.model_id()
    }
}

/// Serves recorded responses by request hash. A miss is an error; replay
/// ignores credentials and the network entirely.
pub struct ReplayBackend {
    responses: HashMap<String, String>,
    model: String,
}

impl ReplayBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<ReplayBackend, BackendError> {
        let entries = read_cassette(path.as_ref())?;
        if entries.is_empty() {
            return Err(BackendError::Cassette(format!(
                "{} holds no entries",
                path.as_ref().display()
            )));
        }
        let model = entries[0].request.model.clone();
        let mut responses = HashMap::with_capacity(entries.len());
        for e in entries {
            // First write wins: replay is a pure function of the request.
            responses.entry(e.hash).or_insert(e.response);
        }
        Ok(ReplayBackend { responses, model })
    }
}

impl ChatBackend for ReplayBackend {
    fn chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<String, BackendError> {
        let hash = request_hash(&self.model, messages, params);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(BackendError::CassetteMiss { hash })
    }

    fn model_id(&self) -> String {
        self.model.clone()
    }
}
