use std::collections::HashMap;

use super::{ChatBackend, CompletionRequest, CompletionResult, ProviderError, Usage};

type Responder = dyn Fn(&CompletionRequest) -> Option<String> + Send + Sync;

/// Deterministic backend for tests and oracle runs.
///
/// Responses are looked up by request digest first, then by an optional
/// responder function, then an optional fallback text.
pub struct ScriptedBackend {
    name: String,
    entries: HashMap<String, String>,
    responder: Option<Box<Responder>>,
    fallback: Option<String>,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: HashMap::new(),
            responder: None,
            fallback: None,
        }
    }

    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(&CompletionRequest) -> Option<String> + Send + Sync + 'static,
    ) -> Self {
        let mut s = Self::new(name);
        s.responder = Some(Box::new(f));
        s
    }

    /// Replies `text` to every request without a more specific entry.
    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn insert(&mut self, request: &CompletionRequest, text: impl Into<String>) {
        self.entries.insert(request.digest(), text.into());
    }

    pub fn insert_digest(&mut self, digest: impl Into<String>, text: impl Into<String>) {
        self.entries.insert(digest.into(), text.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let digest = request.digest();
        let text = self
            .entries
            .get(&digest)
            .cloned()
            .or_else(|| self.responder.as_ref().and_then(|f| f(request)))
            .or_else(|| self.fallback.clone())
            .ok_or(ProviderError::NoScript(digest))?;
        Ok(CompletionResult {
            usage: Usage::estimate(request, &text),
            text,
            backend: self.name.clone(),
            cache_hit: false,
        })
    }

    fn name(&self) -> &str {
        &self.name
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::Message;

    #[test]
    fn lookup_order() {
        let a = CompletionRequest::new("m", vec![Message::user("a")]);
        let b = CompletionRequest::new("m", vec![Message::user("b")]);
        let mut s = ScriptedBackend::new("s");
        s.insert(&a, "canned");
        assert_eq!(s.complete(&a).unwrap().text, "canned");
        assert!(matches!(s.complete(&b), Err(ProviderError::NoScript(_))));
        let s = s.with_fallback("default");
        assert_eq!(s.complete(&b).unwrap().text, "default");
        assert_eq!(s.complete(&a).unwrap().text, "canned");
    }
}
