use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ClientError, Completer, Completion, EndpointConfig, Usage};
use crate::prompt::Prompt;

/// Counting gate bounding concurrent requests. Tracks the peak for tests.
pub(crate) struct Gate {
    state: Mutex<(usize, usize)>,
    freed: Condvar,
    limit: usize,
}

pub(crate) struct Permit<'a>(&'a Gate);

impl Gate {
    pub(crate) fn new(limit: usize) -> Self {
        Self {
            state: Mutex::new((0, 0)),
            freed: Condvar::new(),
            limit,
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut s = self.state.lock().expect("gate lock");
        while s.0 >= self.limit {
            s = self.freed.wait(s).expect("gate lock");
        }
        s.0 += 1;
        s.1 = s.1.max(s.0);
        Permit(self)
    }

    pub(crate) fn peak(&self) -> usize {
        self.state.lock().expect("gate lock").1
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut s = self.0.state.lock().expect("gate lock");
        s.0 -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(Completion),
    Retry(String),
    Fatal(ClientError),
}

fn is_context_rejection(body: &str) -> bool {
    let b = body.to_ascii_lowercase();
    ["context_length", "context length", "context window", "maximum context", "too many tokens"]
        .iter()
        .any(|p| b.contains(p))
}

/// Chat-completions client over blocking HTTP. Shareable across threads.
pub struct HttpClient {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    gate: Gate,
    requests: AtomicUsize,
}

impl HttpClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            api_key: cfg.api_key(),
            gate: Gate::new(cfg.max_in_flight),
            agent,
            cfg,
            requests: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    /// HTTP requests issued so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.gate.peak()
    }

    fn attempt(&self, text: &str) -> Attempt {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": text}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        let _permit = self.gate.acquire();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut req = self.agent.post(self.cfg.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        match status {
            200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
                Ok(r) => match r.choices.into_iter().next() {
                    Some(c) => Attempt::Done(Completion {
                        text: c.message.content.unwrap_or_default(),
                        usage: r.usage,
                        cached: false,
                    }),
                    None => Attempt::Fatal(ClientError::Malformed("no choices".into())),
                },
                Err(e) => Attempt::Fatal(ClientError::Malformed(e.to_string())),
            },
            400 | 413 | 422 if is_context_rejection(&text) => {
                Attempt::Fatal(ClientError::ContextLength(text))
            }
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {text}")),
            _ => Attempt::Fatal(ClientError::Config {
                status: Some(status),
                msg: text,
            }),
        }
    }

    pub fn complete_text(&self, text: &str) -> Result<Completion, ClientError> {
        if let Some(budget) = self.cfg.context_char_budget {
            let len = text.chars().count();
            if len > budget {
                return Err(ClientError::ContextLength(format!(
                    "prompt has {len} characters, budget is {budget}"
                )));
            }
        }
        let mut last = String::new();
        for attempt in 1..=self.cfg.retry.max_attempts {
            match self.attempt(text) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(msg) => {
                    log::warn!("attempt {attempt} failed: {msg}");
                    last = msg;
                    if attempt < self.cfg.retry.max_attempts {
                        std::thread::sleep(self.cfg.retry.delay(attempt));
                    }
                }
            }
        }
        Err(ClientError::Transport {
            attempts: self.cfg.retry.max_attempts,
            msg: last,
        })
    }
}

impl Completer for HttpClient {
    fn model(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, _prompt: &Prompt, text: &str) -> Result<Completion, ClientError> {
        self.complete_text(text)
    }
}
