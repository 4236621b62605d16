use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{BackendError, CompletionParams};

/// Settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Minimum spacing between request starts.
    #[serde(default)]
    pub min_interval_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_attempts() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_in_flight() -> usize {
    4
}
fn default_timeout() -> u64 {
    120
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            max_attempts: default_attempts(),
            backoff_ms: default_backoff_ms(),
            max_in_flight: default_in_flight(),
            min_interval_ms: 0,
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

pub(super) struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
    last_start: Mutex<Option<Instant>>,
    next_id: AtomicU64,
}

impl HttpBackend {
    pub(super) fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                BackendError::Transport(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Ok(HttpBackend {
            config,
            agent,
            api_key,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
            last_start: Mutex::new(None),
            next_id: AtomicU64::new(0),
        })
    }

    pub(super) fn complete(
        &self,
        prompt: &str,
        params: &CompletionParams,
    ) -> Result<String, BackendError> {
        let _slot = self.acquire();
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let attempts = self.config.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.pace();
            let id = self.next_id.fetch_add(1, Ordering::Relaxed);
            match self.send(&body, id) {
                Ok(text) => return Ok(text),
                Err(e) if e.retriable() && attempt < attempts => {
                    log::warn!("request {id} attempt {attempt} failed: {e}");
                    let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                    std::thread::sleep(Duration::from_millis(wait));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send(&self, body: &serde_json::Value, id: u64) -> Result<String, BackendError> {
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .header("X-Request-Id", &id.to_string());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Status {
                status,
                retriable: status == 429 || status >= 500,
                body: text,
            });
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let limit = self.config.max_in_flight.max(1);
        let mut n = self.in_flight.lock().unwrap();
        while *n >= limit {
            n = self.slot_freed.wait(n).unwrap();
        }
        *n += 1;
        SlotGuard(self)
    }

    fn pace(&self) {
        if self.config.min_interval_ms == 0 {
            return;
        }
        let gap = Duration::from_millis(self.config.min_interval_ms);
        let mut last = self.last_start.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < gap {
                std::thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

struct SlotGuard<'a>(&'a HttpBackend);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.slot_freed.notify_one();
    }
}
