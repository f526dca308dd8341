//! Chat-completion client with a record/replay transcript.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown mode '{other}'; expected live, record or replay")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    /// SHA-256 of the request's canonical JSON.
    pub fn key(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        sha256_hex(&canonical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub key: String,
    pub request: ChatRequest,
    pub response: String,
    pub timestamp: String,
}

/// JSON-lines log of model calls, one record per key.
#[derive(Debug)]
pub struct Transcript {
    path: Option<PathBuf>,
    records: Mutex<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    order: Vec<TranscriptRecord>,
    by_key: HashMap<String, usize>,
}

impl Transcript {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            records: Mutex::default(),
        }
    }

    /// Opens (or creates on first append) a transcript file. A torn final
    /// line, left by a crash mid-write, is dropped.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let path = path.into();
        let mut inner = Inner::default();
        if path.exists() {
            let file = File::open(&path).map_err(|e| transcript_err(&path, e))?;
            let lines: Vec<String> = BufReader::new(file)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(|e| transcript_err(&path, e))?;
            let count = lines.len();
            for (i, line) in lines.into_iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<TranscriptRecord>(&line) {
                    Ok(rec) => {
                        if inner.by_key.contains_key(&rec.key) {
                            log::warn!("{}: duplicate key {} on line {}", path.display(), rec.key, i + 1);
                            continue;
                        }
                        inner.by_key.insert(rec.key.clone(), inner.order.len());
                        inner.order.push(rec);
                    }
                    Err(e) if i + 1 == count => {
                        log::warn!("{}: ignoring torn last line: {e}", path.display());
                        rewrite(&path, &inner.order)?;
                    }
                    Err(e) => {
                        return Err(LlmError::Transcript(format!("{} line {}: {e}", path.display(), i + 1)));
                    }
                }
            }
        }
        Ok(Self {
            path: Some(path),
            records: Mutex::new(inner),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.lock().order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.lock().order.clone()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let inner = self.lock();
        inner.by_key.get(key).map(|&i| inner.order[i].response.clone())
    }

    /// Appends a record unless its key is already present.
    pub fn append(&self, record: TranscriptRecord) -> Result<bool, LlmError> {
        let mut inner = self.lock();
        if inner.by_key.contains_key(&record.key) {
            return Ok(false);
        }
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&record).map_err(|e| LlmError::Transcript(e.to_string()))?;
            line.push('\n');
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| transcript_err(path, e))?;
            file.write_all(line.as_bytes()).map_err(|e| transcript_err(path, e))?;
            file.sync_data().map_err(|e| transcript_err(path, e))?;
        }
        let at = inner.order.len();
        inner.by_key.insert(record.key.clone(), at);
        inner.order.push(record);
        Ok(true)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.records.lock().unwrap_or_else(|p| p.into_inner())
    }
}

fn rewrite(path: &Path, records: &[TranscriptRecord]) -> Result<(), LlmError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| LlmError::Transcript(e.to_string()))?);
        out.push('\n');
    }
    crate::fsutil::write_atomic(path, out.as_bytes()).map_err(|e| transcript_err(path, e))
}

fn transcript_err(path: &Path, e: std::io::Error) -> LlmError {
    LlmError::Transcript(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

/// Something that answers chat requests: the HTTP endpoint, or a stand-in.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// An OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| {
            let retryable = match &e {
                ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
                ureq::Error::Io(_) | ureq::Error::Timeout(_) | ureq::Error::ConnectionFailed => true,
                _ => false,
            };
            TransportError {
                message: e.to_string(),
                retryable,
            }
        })?;
        let body: serde_json::Value = resp.body_mut().read_json().map_err(|e| TransportError {
            message: format!("unreadable response: {e}"),
            retryable: true,
        })?;
        body.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| TransportError {
                message: "response has no choices[0].message.content".into(),
                retryable: false,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.min(16)))
    }
}

pub struct LlmClient {
    mode: Mode,
    model: String,
    transport: Option<Box<dyn Transport>>,
    transcript: Transcript,
    retry: RetryPolicy,
    network_calls: AtomicUsize,
}

impl LlmClient {
    pub fn new(
        mode: Mode,
        model: impl Into<String>,
        transport: Option<Box<dyn Transport>>,
        transcript: Transcript,
    ) -> Self {
        Self {
            mode,
            model: model.into(),
            transport,
            transcript,
            retry: RetryPolicy::default(),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Calls that reached the transport, successful or not.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: 0.0,
        }
    }

    /// Replay answers from the transcript only. Record answers from the
    /// transcript when it can and calls out otherwise, so a resumed run never
    /// repeats a recorded call.
    pub fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let key = request.key();
        match self.mode {
            Mode::Replay => self.transcript.get(&key).ok_or(LlmError::ReplayMiss { key }),
            Mode::Record => {
                if let Some(hit) = self.transcript.get(&key) {
                    return Ok(hit);
                }
                let response = self.send(request)?;
                self.transcript.append(TranscriptRecord {
                    key,
                    request: request.clone(),
                    response: response.clone(),
                    timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                })?;
                Ok(response)
            }
            Mode::Live => self.send(request),
        }
    }

    fn send(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| LlmError::Config("no transport configured for live calls".into()))?;
        let mut attempt = 0;
        loop {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match transport.send(request) {
                Ok(r) => return Ok(r),
                Err(e) if e.retryable && attempt + 1 < self.retry.max_attempts => {
                    log::warn!("model call failed ({}); retrying", e.message);
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(LlmError::Transport {
                        message: e.message,
                        attempts: attempt + 1,
                    });
                }
            }
        }
    }
}
