//! Chat-completion endpoints, a response cache, a ground-truth mock model and
//! the sweep driver.

mod cache;
mod config;
mod http;
mod mock;
mod sweep;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::Prompt;

pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use config::{EndpointConfig, RetryPolicy};
pub use http::HttpClient;
pub use mock::{mock_complete, MockClient};
pub use sweep::{read_records, run_sweep, SweepOutcome, SweepSpec};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempt(s): {msg}")]
    Transport { attempts: u32, msg: String },

    /// A request the endpoint refused outright. Not retried.
    #[error("configuration error{}: {msg}", .status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Config { status: Option<u16>, msg: String },

    /// The prompt does not fit the model's context window.
    #[error("context length exceeded: {0}")]
    ContextLength(String),

    #[error("malformed response: {0}")]
    Malformed(String),

    #[error("cache: {0}")]
    Cache(#[from] crate::Error),
}

impl ClientError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Self::Config {
            status: None,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
    #[serde(default)]
    pub total_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
    pub cached: bool,
}

/// Anything that turns a rendered prompt into a completion.
pub trait Completer: Sync {
    fn model(&self) -> &str;
    fn complete(&self, prompt: &Prompt, text: &str) -> Result<Completion, ClientError>;
}

/// Serves repeated prompts from a [`ResponseCache`] and records every fresh
/// completion in it.
pub struct CachedClient<'a, C: Completer + ?Sized> {
    inner: &'a C,
    cache: &'a ResponseCache,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl<'a, C: Completer + ?Sized> CachedClient<'a, C> {
    pub fn new(inner: &'a C, cache: &'a ResponseCache) -> Self {
        Self {
            inner,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }
}

impl<C: Completer + ?Sized> Completer for CachedClient<'_, C> {
    fn model(&self) -> &str {
        self.inner.model()
    }

    fn complete(&self, prompt: &Prompt, text: &str) -> Result<Completion, ClientError> {
        if let Some(e) = self.cache.get(self.model(), text) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(Completion {
                text: e.response,
                usage: e.usage,
                cached: true,
            });
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let fresh = self.inner.complete(prompt, text)?;
        let stored = self.cache.put(self.model(), text, &fresh.text, fresh.usage)?;
        Ok(Completion {
            text: stored.response,
            ..fresh
        })
    }
}
