use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::cache::{content_key, ResponseCache};
use super::CallRecord;
use crate::error::GatewayError;
use crate::sync::Semaphore;

/// One chat-completion request.
///
/// `attempt` separates otherwise identical requests issued at different
/// repair iterations, so a re-issued prompt is a fresh sample instead of a
/// cache replay. It takes part in the cache key and is never sent to the
/// service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    #[serde(default)]
    pub attempt: u32,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, temperature: f64) -> Self {
        ChatRequest {
            system: system.into(),
            user: user.into(),
            temperature,
            attempt: 0,
        }
    }

    pub fn with_attempt(mut self, attempt: u32) -> Self {
        self.attempt = attempt;
        self
    }

    /// Rough token estimate: characters / 4, rounded up.
    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.system) + estimate_tokens(&self.user)
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// A completed exchange as recorded in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub response_text: String,
    pub backend_id: String,
    pub cache_key: String,
}

pub trait ChatBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
    fn last_attempts(&self) -> u32 {
        1
    }
}

/// One scripted rule: fires when every `contains` needle occurs in the user
/// text (and, if set, the request attempt matches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub contains: Vec<String>,
    #[serde(default)]
    pub attempt: Option<u32>,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatScript {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub default: Option<String>,
}

/// Offline chat backend driven by a rule table; the first matching rule
/// wins. Depends only on request content, never on call order.
#[derive(Debug, Clone)]
pub struct ScriptedChat {
    id: String,
    script: ChatScript,
}

impl ScriptedChat {
    pub fn new(script: ChatScript) -> Self {
        ScriptedChat {
            id: "scripted".into(),
            script,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Exact user-text → response map.
    pub fn from_map(map: HashMap<String, String>) -> Self {
        let mut rules: Vec<ScriptRule> = map
            .into_iter()
            .map(|(prompt, response)| ScriptRule {
                contains: vec![prompt],
                attempt: None,
                response,
            })
            .collect();
        // Longer needles first so a prompt never matches a shorter prefix key.
        rules.sort_by(|a, b| b.contains[0].len().cmp(&a.contains[0].len()).then(a.contains.cmp(&b.contains)));
        ScriptedChat::new(ChatScript { rules, default: None })
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read chat script {}: {e}", path.display())))?;
        let script: ChatScript = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("bad chat script {}: {e}", path.display())))?;
        Ok(ScriptedChat::new(script))
    }
}

impl ChatBackend for ScriptedChat {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let hit = self.script.rules.iter().find(|r| {
            r.attempt.is_none_or(|a| a == request.attempt)
                && r.contains.iter().all(|needle| request.user.contains(needle.as_str()))
        });
        match hit {
            Some(rule) => Ok(rule.response.clone()),
            None => self
                .script
                .default
                .clone()
                .ok_or_else(|| GatewayError::Payload("no scripted response matches the request".into())),
        }
    }
}

/// Response from [`ChatClient::chat`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub cache_key: String,
}

/// Caching, budget-checking front of a [`ChatBackend`].
pub struct ChatClient {
    backend: Box<dyn ChatBackend>,
    cache: ResponseCache,
    token_budget: usize,
    in_flight: Semaphore,
    calls: Mutex<Vec<CallRecord>>,
}

pub const DEFAULT_TOKEN_BUDGET: usize = 16_000;

impl ChatClient {
    pub fn new(backend: Box<dyn ChatBackend>, cache: ResponseCache) -> Self {
        ChatClient {
            backend,
            cache,
            token_budget: DEFAULT_TOKEN_BUDGET,
            in_flight: Semaphore::new(4),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn with_token_budget(mut self, budget: usize) -> Self {
        self.token_budget = budget;
        self
    }

    pub fn with_in_flight_limit(mut self, limit: usize) -> Self {
        self.in_flight = Semaphore::new(limit);
        self
    }

    pub fn backend_id(&self) -> &str {
        self.backend.id()
    }

    pub fn token_budget(&self) -> usize {
        self.token_budget
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    /// Stable hash of (backend, system text, user text, temperature, attempt).
    pub fn cache_key(&self, request: &ChatRequest) -> String {
        content_key(&[
            "chat",
            self.backend.id(),
            &request.system,
            &request.user,
            &format!("{:?}", request.temperature),
            &request.attempt.to_string(),
        ])
    }

    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let estimated = request.estimated_tokens();
        if estimated > self.token_budget {
            return Err(GatewayError::Budget {
                estimated,
                budget: self.token_budget,
            });
        }
        if !(0.0..=2.0).contains(&request.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                request.temperature
            )));
        }
        let cache_key = self.cache_key(request);
        if let Some(text) = self.cache.get(&cache_key) {
            return Ok(ChatResponse { text, cache_key });
        }
        let result = {
            let _permit = self.in_flight.acquire();
            let result = self.backend.complete(request);
            self.calls.lock().expect("call log poisoned").push(CallRecord {
                backend_id: self.backend.id().to_string(),
                cache_keys: vec![cache_key.clone()],
                attempts: self.backend.last_attempts(),
            });
            result
        };
        let text = result?;
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        self.cache.put(&cache_key, &text)?;
        Ok(ChatResponse { text, cache_key })
    }

    pub fn exchange(&self, request: &ChatRequest) -> Result<ChatExchange, GatewayError> {
        let response = self.chat(request)?;
        Ok(ChatExchange {
            system_text: request.system.clone(),
            user_text: request.user.clone(),
            temperature: request.temperature,
            response_text: response.text,
            backend_id: self.backend.id().to_string(),
            cache_key: response.cache_key,
        })
    }
}
