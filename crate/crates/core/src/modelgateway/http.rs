//! JSON-over-HTTP backends speaking the common embeddings / chat
//! completions wire format.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::chat::{ChatBackend, ChatRequest};
use super::embed::EmbeddingBackend;
use crate::error::GatewayError;

/// Connection settings shared by both HTTP backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_attempts() -> u32 {
    3
}
fn default_timeout() -> u64 {
    120
}
fn default_backoff() -> u64 {
    500
}

impl HttpSettings {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpSettings {
            url: url.into(),
            model: model.into(),
            api_key_env: None,
            max_attempts: default_attempts(),
            timeout_secs: default_timeout(),
            backoff_ms: default_backoff(),
        }
    }
}

struct Transport {
    settings: HttpSettings,
    client: reqwest::blocking::Client,
    last_attempts: AtomicU32,
}

impl Transport {
    fn new(settings: HttpSettings) -> Result<Self, GatewayError> {
        if settings.max_attempts == 0 {
            return Err(GatewayError::Config("max_attempts must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Transport {
            settings,
            client,
            last_attempts: AtomicU32::new(0),
        })
    }

    fn api_key(&self) -> Result<Option<String>, GatewayError> {
        match &self.settings.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| GatewayError::Config(format!("environment variable `{var}` is not set"))),
        }
    }

    /// POSTs `body`, retrying transport failures, 429 and 5xx responses.
    fn post(&self, body: &serde_json::Value) -> Result<serde_json::Value, GatewayError> {
        let key = self.api_key()?;
        let mut last_error = String::new();
        for attempt in 1..=self.settings.max_attempts {
            self.last_attempts.store(attempt, Ordering::Relaxed);
            if attempt > 1 && self.settings.backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.settings.backoff_ms << (attempt - 2)));
            }
            let mut req = self.client.post(&self.settings.url).json(body);
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp
                            .json::<serde_json::Value>()
                            .map_err(|e| GatewayError::Payload(e.to_string()));
                    }
                    last_error = format!("HTTP {status}");
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            message: last_error,
                        });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
            log::debug!("{} attempt {attempt} failed: {last_error}", self.settings.url);
        }
        Err(GatewayError::Transport {
            attempts: self.settings.max_attempts,
            message: last_error,
        })
    }
}

pub struct HttpEmbedder {
    id: String,
    transport: Transport,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings) -> Result<Self, GatewayError> {
        Ok(HttpEmbedder {
            id: format!("http:{}", settings.model),
            transport: Transport::new(settings)?,
        })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl EmbeddingBackend for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({ "model": self.transport.settings.model, "input": texts });
        let value = self.transport.post(&body)?;
        let parsed: EmbeddingResponse =
            serde_json::from_value(value).map_err(|e| GatewayError::Payload(e.to_string()))?;
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    fn last_attempts(&self) -> u32 {
        self.transport.last_attempts.load(Ordering::Relaxed)
    }
}

pub struct HttpChat {
    id: String,
    transport: Transport,
}

impl HttpChat {
    pub fn new(settings: HttpSettings) -> Result<Self, GatewayError> {
        Ok(HttpChat {
            id: format!("http:{}", settings.model),
            transport: Transport::new(settings)?,
        })
    }
}

/// Wire body for a chat request. The attempt counter stays local.
pub fn chat_request_body(model: &str, request: &ChatRequest) -> serde_json::Value {
    let mut messages = Vec::new();
    if !request.system.is_empty() {
        messages.push(json!({ "role": "system", "content": request.system }));
    }
    messages.push(json!({ "role": "user", "content": request.user }));
    json!({ "model": model, "temperature": request.temperature, "messages": messages })
}

impl ChatBackend for HttpChat {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let body = chat_request_body(&self.transport.settings.model, request);
        let value = self.transport.post(&body)?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Payload("missing choices[0].message.content".into()))
    }

    fn last_attempts(&self) -> u32 {
        self.transport.last_attempts.load(Ordering::Relaxed)
    }
}
