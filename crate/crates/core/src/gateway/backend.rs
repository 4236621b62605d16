use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::http::{HttpBackend, HttpConfig};
use super::PromptBundle;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("http status {status}: {body}")]
    Status {
        status: u16,
        retriable: bool,
        body: String,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("script exhausted for stream {0:?}")]
    ScriptExhausted(String),
    #[error("no recorded reply for prompt {0}")]
    TranscriptMiss(String),
    #[error("transcript i/o: {0}")]
    Io(String),
}

impl BackendError {
    pub fn retriable(&self) -> bool {
        match self {
            BackendError::Status { retriable, .. } => *retriable,
            BackendError::Transport(_) => true,
            _ => false,
        }
    }
}

/// Sampling parameters sent with every request and written to transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            temperature: 0.0,
            max_tokens: 4096,
            seed: None,
        }
    }
}

/// One line of a JSONL transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub prompt_sha256: String,
    pub prompt: String,
    pub reply: String,
    pub params: CompletionParams,
    pub timestamp: String,
    #[serde(default)]
    pub stream: String,
}

/// Collapses whitespace runs to one space and trims the ends.
pub fn normalize_prompt(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn prompt_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(normalize_prompt(text).as_bytes()))
}

#[derive(Default)]
struct Script {
    streams: HashMap<String, VecDeque<String>>,
    shared: VecDeque<String>,
}

enum Backend {
    Scripted(Mutex<Script>),
    Replay(Mutex<HashMap<String, VecDeque<String>>>),
    Http(HttpBackend),
    Record {
        inner: BackendHandle,
        path: PathBuf,
        file: Mutex<File>,
    },
}

/// Cheaply cloneable handle to a completion backend.
#[derive(Clone)]
pub struct BackendHandle {
    backend: Arc<Backend>,
    params: CompletionParams,
}

impl std::fmt::Debug for BackendHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendHandle")
            .field("kind", &self.kind())
            .field("params", &self.params)
            .finish()
    }
}

impl BackendHandle {
    /// Replies served in order to any stream without its own queue.
    pub fn scripted<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::wrap(Backend::Scripted(Mutex::new(Script {
            shared: replies.into_iter().map(Into::into).collect(),
            ..Default::default()
        })))
    }

    /// Per-stream reply queues; streams without a queue fall back to `shared`.
    pub fn scripted_streams(
        streams: HashMap<String, Vec<String>>,
        shared: Vec<String>,
    ) -> Self {
        Self::wrap(Backend::Scripted(Mutex::new(Script {
            streams: streams.into_iter().map(|(k, v)| (k, v.into())).collect(),
            shared: shared.into(),
        })))
    }

    pub fn http(config: HttpConfig) -> Result<Self, BackendError> {
        Ok(Self::wrap(Backend::Http(HttpBackend::new(config)?)))
    }

    /// Serves replies from a transcript, matching prompts by normalized hash.
    /// Repeated prompts receive their recorded replies in order.
    pub fn replay(path: &Path) -> Result<Self, BackendError> {
        let mut table: HashMap<String, VecDeque<String>> = HashMap::new();
        for entry in read_transcript(path)? {
            table.entry(entry.prompt_sha256).or_default().push_back(entry.reply);
        }
        Ok(Self::wrap(Backend::Replay(Mutex::new(table))))
    }

    /// Forwards to `inner` and appends every exchange to `path`.
    pub fn record(inner: BackendHandle, path: &Path) -> Result<Self, BackendError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| BackendError::Io(e.to_string()))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
        let params = inner.params.clone();
        Ok(BackendHandle {
            backend: Arc::new(Backend::Record {
                inner,
                path: path.to_path_buf(),
                file: Mutex::new(file),
            }),
            params,
        })
    }

    fn wrap(backend: Backend) -> Self {
        BackendHandle {
            backend: Arc::new(backend),
            params: CompletionParams::default(),
        }
    }

    pub fn with_params(mut self, params: CompletionParams) -> Self {
        self.params = params;
        self
    }

    pub fn params(&self) -> &CompletionParams {
        &self.params
    }

    pub fn kind(&self) -> &'static str {
        match &*self.backend {
            Backend::Scripted(_) => "scripted",
            Backend::Replay(_) => "replay",
            Backend::Http(_) => "http",
            Backend::Record { .. } => "record",
        }
    }

    pub fn transcript_path(&self) -> Option<&Path> {
        match &*self.backend {
            Backend::Record { path, .. } => Some(path),
            _ => None,
        }
    }

    pub fn complete(&self, prompt: &PromptBundle) -> Result<String, BackendError> {
        match &*self.backend {
            Backend::Scripted(script) => {
                let mut script = script.lock().unwrap();
                let reply = match script.streams.get_mut(&prompt.stream) {
                    Some(queue) => queue.pop_front(),
                    None => script.shared.pop_front(),
                };
                reply.ok_or_else(|| BackendError::ScriptExhausted(prompt.stream.clone()))
            }
            Backend::Replay(table) => {
                let hash = prompt_sha256(&prompt.text);
                table
                    .lock()
                    .unwrap()
                    .get_mut(&hash)
                    .and_then(VecDeque::pop_front)
                    .ok_or(BackendError::TranscriptMiss(hash))
            }
            Backend::Http(http) => http.complete(&prompt.text, &self.params),
            Backend::Record { inner, file, .. } => {
                let reply = inner.complete(prompt)?;
                let entry = TranscriptEntry {
                    prompt_sha256: prompt_sha256(&prompt.text),
                    prompt: prompt.text.clone(),
                    reply: reply.clone(),
                    params: self.params.clone(),
                    timestamp: chrono::Utc::now().to_rfc3339(),
                    stream: prompt.stream.clone(),
                };
                let mut line = serde_json::to_string(&entry).expect("transcript entry serializes");
                line.push('\n');
                let mut file = file.lock().unwrap();
                file.write_all(line.as_bytes())
                    .and_then(|_| file.flush())
                    .map_err(|e| BackendError::Io(e.to_string()))?;
                Ok(reply)
            }
        }
    }
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, BackendError> {
    let file = File::open(path).map_err(|e| BackendError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BackendError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| BackendError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Role;

    fn prompt(text: &str, stream: &str) -> PromptBundle {
        PromptBundle {
            role: Role::Planner,
            text: text.into(),
            shot_count: 0,
            shot_ids: vec![],
            stream: stream.into(),
        }
    }

    #[test]
    fn script_runs_out() {
        let b = BackendHandle::scripted(["A"]);
        assert_eq!(b.complete(&prompt("x", "")).unwrap(), "A");
        assert_eq!(
            b.complete(&prompt("x", "")),
            Err(BackendError::ScriptExhausted(String::new()))
        );
    }

    #[test]
    fn streams_keep_their_own_order() {
        let streams = HashMap::from([
            ("a".to_string(), vec!["a1".to_string(), "a2".to_string()]),
            ("b".to_string(), vec!["b1".to_string()]),
        ]);
        let b = BackendHandle::scripted_streams(streams, vec![]);
        assert_eq!(b.complete(&prompt("", "b")).unwrap(), "b1");
        assert_eq!(b.complete(&prompt("", "a")).unwrap(), "a1");
        assert_eq!(b.complete(&prompt("", "a")).unwrap(), "a2");
        assert!(b.complete(&prompt("", "b")).is_err());
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let rec = BackendHandle::record(BackendHandle::scripted(["one", "two"]), &path).unwrap();
        assert_eq!(rec.complete(&prompt("hello  world", "")).unwrap(), "one");
        assert_eq!(rec.complete(&prompt("again", "")).unwrap(), "two");

        let rep = BackendHandle::replay(&path).unwrap();
        assert_eq!(rep.complete(&prompt("again", "")).unwrap(), "two");
        assert_eq!(rep.complete(&prompt(" hello\nworld ", "")).unwrap(), "one");
        let miss = rep.complete(&prompt("hello there", ""));
        assert!(matches!(miss, Err(BackendError::TranscriptMiss(_))));
    }
}
