use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, CompletionRequest, CompletionResult, ProviderError, Usage};

/// Chat-completions client for OpenAI-compatible servers.
pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    name: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        Self {
            name: format!("http:{base_url}"),
            base_url,
            api_key,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(300))
                .build(),
        }
    }

    /// Reads the bearer token from `api_key_env`; a missing variable means
    /// no authentication header.
    pub fn from_env(base_url: impl Into<String>, api_key_env: &str) -> Self {
        Self::new(base_url, std::env::var(api_key_env).ok())
    }

    pub(crate) fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value, ProviderError> {
        let mut req = self.agent.post(&format!("{}/{}", self.base_url, path));
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp
                .into_json()
                .map_err(|e| ProviderError::Transport(format!("invalid response body: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                Err(ProviderError::BackendRefusal(format!("HTTP {code}: {body}")))
            }
            Err(e) => Err(ProviderError::Transport(e.to_string())),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        request.validate()?;
        let mut body = json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let value = self.post("chat/completions", body)?;
        let resp: ChatResponse = serde_json::from_value(value)
            .map_err(|e| ProviderError::Transport(format!("unexpected response shape: {e}")))?;
        let text = resp
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ProviderError::BackendRefusal("empty completion".into()))?;
        let usage = match resp.usage {
            Some(u) => Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            },
            None => Usage::estimate(request, &text),
        };
        Ok(CompletionResult {
            text,
            usage,
            backend: self.name.clone(),
            cache_hit: false,
        })
    }

    fn name(&self) -> &str {
        &self.name
    }
}
