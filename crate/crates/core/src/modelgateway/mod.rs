//! Clients for embedding and chat-completion services.
//!
//! Every client sits in front of a pluggable backend (HTTP or an offline
//! mock) and adds a content-addressed response cache, an in-flight limit and
//! a log of actual backend invocations. Cache hits never reach the backend,
//! so full runs replay offline from a warm cache directory.

mod cache;
mod chat;
mod embed;
mod http;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use cache::{content_key, ResponseCache};
pub use chat::{
    estimate_tokens, ChatBackend, ChatClient, ChatExchange, ChatRequest, ChatResponse, ChatScript,
    ScriptRule, ScriptedChat, DEFAULT_TOKEN_BUDGET,
};
pub use embed::{
    fnv1a64, mock_embed, mock_token_counts, mock_tokens, EmbeddingBackend, EmbeddingClient, EmbeddingVector,
    MockEmbedder, DEFAULT_MOCK_DIMS,
};
pub use http::{chat_request_body, HttpChat, HttpEmbedder, HttpSettings};

use crate::error::GatewayError;

/// One backend invocation (a cache miss).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub backend_id: String,
    pub cache_keys: Vec<String>,
    pub attempts: u32,
}

/// Embedding backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbeddingConfig {
    Mock {
        #[serde(default = "default_dims")]
        dims: usize,
    },
    Http {
        dims: usize,
        #[serde(flatten)]
        settings: HttpSettings,
    },
}

fn default_dims() -> usize {
    DEFAULT_MOCK_DIMS
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig::Mock {
            dims: DEFAULT_MOCK_DIMS,
        }
    }
}

impl EmbeddingConfig {
    pub fn dims(&self) -> usize {
        match self {
            EmbeddingConfig::Mock { dims } | EmbeddingConfig::Http { dims, .. } => *dims,
        }
    }

    pub fn build(&self, cache: ResponseCache) -> Result<EmbeddingClient, GatewayError> {
        let backend: Box<dyn EmbeddingBackend> = match self {
            EmbeddingConfig::Mock { dims } => Box::new(MockEmbedder::new(*dims)),
            EmbeddingConfig::Http { settings, .. } => Box::new(HttpEmbedder::new(settings.clone())?),
        };
        Ok(EmbeddingClient::new(backend, self.dims(), cache))
    }
}

/// Chat backend selection. `Exact` is the offline judge that answers YES
/// exactly when both descriptions in a judge prompt are textually equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChatConfig {
    Scripted { script: PathBuf },
    Exact,
    Http(HttpSettings),
}

impl ChatConfig {
    /// Resolves relative script paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let ChatConfig::Scripted { script } = self {
            if script.is_relative() {
                *script = base.join(&*script);
            }
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn ChatBackend>, GatewayError> {
        Ok(match self {
            ChatConfig::Scripted { script } => Box::new(ScriptedChat::from_file(script)?),
            ChatConfig::Exact => Box::new(crate::descmetric::ExactMatchJudge),
            ChatConfig::Http(settings) => Box::new(HttpChat::new(settings.clone())?),
        })
    }
}

/// The three clients a pipeline run needs.
pub struct Gateway {
    pub embeddings: EmbeddingClient,
    pub generator: ChatClient,
    pub judge: ChatClient,
}

impl Gateway {
    pub fn new(embeddings: EmbeddingClient, generator: ChatClient, judge: ChatClient) -> Self {
        Gateway {
            embeddings,
            generator,
            judge,
        }
    }

    /// Offline gateway with mock embeddings and the given chat backends,
    /// cached in memory.
    pub fn offline(dims: usize, generator: Box<dyn ChatBackend>, judge: Box<dyn ChatBackend>) -> Self {
        Gateway {
            embeddings: EmbeddingClient::new(Box::new(MockEmbedder::new(dims)), dims, ResponseCache::in_memory()),
            generator: ChatClient::new(generator, ResponseCache::in_memory()),
            judge: ChatClient::new(judge, ResponseCache::in_memory()),
        }
    }
}

/// Opens a cache rooted at `dir/sub`, or an in-memory cache without a dir.
pub fn open_cache(dir: Option<&Path>, sub: &str) -> Result<ResponseCache, GatewayError> {
    match dir {
        Some(d) => ResponseCache::on_disk(d.join(sub)),
        None => Ok(ResponseCache::in_memory()),
    }
}
