//! Text-completion generators: a deterministic offline mock and a client for
//! OpenAI-compatible fine-tune/completion services.

mod mock;
mod remote;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::level::TERMINATOR;
use crate::prompting::{parse_record, FinetuneRecord, PromptError};

pub use mock::MockBackend;
pub use remote::{
    HttpRequest, HttpResponse, Method, RemoteBackend, RemoteConfig, RequestBody, ReqwestTransport, Transport,
    API_BASE_ENV, API_KEY_ENV, DEFAULT_API_BASE, DEFAULT_BASE_MODEL,
};

pub const DEFAULT_TEMPERATURE: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

/// A trained model and the data it was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub backend_kind: BackendKind,
    pub handle: String,
    /// SHA-256 of the fine-tune file the model was last trained on.
    pub trained_on: String,
    pub epochs: u32,
    /// Handle of the model this one continued from.
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model: ModelRef,
    pub prompt: String,
    pub temperature: f64,
    pub n: usize,
    pub stop: Vec<String>,
    pub max_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Room cells, one newline per row, and slack for the terminator.
pub fn default_max_tokens(width: usize, height: usize) -> usize {
    width * height + height + 8
}

impl GenerationRequest {
    pub fn new(model: ModelRef, prompt: String, width: usize, height: usize) -> GenerationRequest {
        GenerationRequest {
            model,
            prompt,
            temperature: DEFAULT_TEMPERATURE,
            n: 1,
            stop: vec![TERMINATOR.to_string()],
            max_tokens: default_max_tokens(width, height),
            seed: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("server rejected request ({status}): {body}")]
    RemoteRejected { status: u16, body: String },
    #[error("fine-tune job {job} ended as {status}")]
    JobFailed { job: String, status: String },
    #[error("fine-tune job {job} did not finish in time")]
    JobTimeout { job: String },
    #[error("records file line {line}: {reason}")]
    RecordsInvalid { line: usize, reason: String },
    #[error("mock backend needs a templated prompt: {0}")]
    MockSpecUnparseable(#[from] PromptError),
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A fine-tunable text generator.
pub trait Generator: Send + Sync {
    /// Trains on the JSONL records at `records_path`, continuing from `base` when given.
    fn fine_tune(&self, base: Option<&ModelRef>, records_path: &Path, epochs: u32) -> Result<ModelRef, BackendError>;

    /// `request.n` raw completions with stop sequences removed.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError>;

    /// Makes `model`, trained in an earlier process on the records now at
    /// `records_path`, usable by this instance. Remote models live server-side.
    fn restore(&self, _model: &ModelRef, _records_path: &Path) -> Result<(), BackendError> {
        Ok(())
    }
}

pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses every line of a fine-tune file.
pub fn read_records(bytes: &[u8]) -> Result<Vec<FinetuneRecord>, BackendError> {
    let text = std::str::from_utf8(bytes).map_err(|e| BackendError::RecordsInvalid {
        line: 0,
        reason: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            parse_record(line).map_err(|e| BackendError::RecordsInvalid {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
