//! Language-model and embedding boundary.
//!
//! Every model call goes through [`ChatBackend::complete`]. Backends are
//! exchangeable: an OpenAI-style HTTP client, a scripted backend keyed on
//! request digests, and a record/replay cache that wraps either.

mod cache;
mod embed;
mod http;
pub mod parse;
mod scripted;

use std::ops::{Add, AddAssign};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheMode, CacheRecord, CachingBackend, ResponseCache};
pub use embed::{cosine, Embedder, EmbeddingVector, HttpEmbedder, MockEmbedder, MOCK_EMBEDDING_DIM};
pub use http::HttpBackend;
pub use parse::{parse_action_list, parse_distribution, parse_hypotheses, PROBABILITY_FLOOR};
pub use scripted::ScriptedBackend;

/// Retries after a reply that cannot be parsed.
pub const DEFAULT_MAX_RETRIES: usize = 3;

const FORMAT_REMINDER: &str = include_str!("../../templates/v1/format_reminder.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend refused the request: {0}")]
    BackendRefusal(String),
    #[error("no cached response for request {0}")]
    CacheMiss(String),
    #[error("no scripted response for request {0}")]
    NoScript(String),
    #[error("could not parse model output: {0}")]
    ParseFailure(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

/// Fields that identify a request. `max_tokens` is left out: at a fixed
/// temperature and seed a longer budget only extends the same reply.
#[derive(Serialize)]
struct DigestView<'a> {
    model_id: &'a str,
    messages: &'a [Message],
    temperature: f64,
    seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            model_id: model_id.into(),
            messages,
            temperature: 0.0,
            seed: None,
            max_tokens: 1024,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    /// Hex SHA-256 of the identifying fields; stable across processes.
    pub fn digest(&self) -> String {
        let view = DigestView {
            model_id: &self.model_id,
            messages: &self.messages,
            temperature: self.temperature,
            seed: self.seed,
        };
        let bytes = serde_json::to_vec(&view).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("no messages".into()));
        }
        if self.messages[1..].iter().any(|m| m.role == Role::System) {
            return Err(ProviderError::InvalidRequest(
                "only the first message may be a system message".into(),
            ));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens is zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    /// Whitespace token estimate for backends that report nothing.
    pub fn estimate(request: &CompletionRequest, text: &str) -> Self {
        let words = |s: &str| s.split_whitespace().count() as u64;
        Self {
            prompt_tokens: request.messages.iter().map(|m| words(&m.content)).sum(),
            completion_tokens: words(text),
        }
    }
}

impl Add for Usage {
    type Output = Usage;
    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Usage {
        iter.fold(Usage::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub usage: Usage,
    pub backend: String,
    pub cache_hit: bool,
}

/// A chat-completion transport. Implementations must tolerate concurrent
/// calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError>;

    fn name(&self) -> &str;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// One provider exchange, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub purpose: String,
    pub digest: String,
    pub request: CompletionRequest,
    pub response: String,
    pub cache_hit: bool,
    pub usage: Usage,
    pub backend: String,
}

/// Sends `request`, parsing the reply with `parse`. A reply that fails to
/// parse is answered with a format reminder and retried up to `max_retries`
/// times. Returns the parsed value and every exchange made.
pub fn complete_parsed<T>(
    backend: &dyn ChatBackend,
    request: CompletionRequest,
    purpose: &str,
    expected_count: usize,
    max_retries: usize,
    parse: impl Fn(&str) -> Result<T, ProviderError>,
) -> Result<(T, Vec<Transcript>), (ProviderError, Vec<Transcript>)> {
    let mut request = request;
    let mut transcripts = Vec::new();
    let mut last_error = None;
    for _ in 0..=max_retries {
        if let Err(e) = request.validate() {
            return Err((e, transcripts));
        }
        let result = match backend.complete(&request) {
            Ok(r) => r,
            Err(e) => return Err((e, transcripts)),
        };
        transcripts.push(Transcript {
            purpose: purpose.to_string(),
            digest: request.digest(),
            request: request.clone(),
            response: result.text.clone(),
            cache_hit: result.cache_hit,
            usage: result.usage,
            backend: result.backend.clone(),
        });
        match parse(&result.text) {
            Ok(value) => return Ok((value, transcripts)),
            Err(e @ ProviderError::ParseFailure(_)) => {
                last_error = Some(e);
                request.messages.push(Message::assistant(result.text));
                request.messages.push(Message::user(
                    FORMAT_REMINDER
                        .trim_end()
                        .replace("{count}", &expected_count.to_string()),
                ));
            }
            Err(e) => return Err((e, transcripts)),
        }
    }
    Err((
        last_error.unwrap_or_else(|| ProviderError::ParseFailure("no attempts made".into())),
        transcripts,
    ))
}
