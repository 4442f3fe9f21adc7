use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{HttpBackend, ProviderError};

pub const MOCK_EMBEDDING_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ProviderError> {
        if values.is_empty() {
            return Err(ProviderError::InvalidRequest("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProviderError::InvalidRequest("non-finite embedding entry".into()));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}

/// Offline embedder: each string maps to a seeded pseudo-random unit
/// vector. Designated strings map to standard basis vectors, so distinct
/// designated strings are exactly orthogonal.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
    designated: HashMap<String, usize>,
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        Self {
            dim: MOCK_EMBEDDING_DIM,
            seed,
            designated: HashMap::new(),
        }
    }

    /// Pins `text` to basis vector `axis` (taken modulo the dimension).
    pub fn designate(mut self, text: impl Into<String>, axis: usize) -> Self {
        self.designated.insert(text.into(), axis % self.dim);
        self
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self::new(0)
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut values = vec![0.0; self.dim];
        if let Some(&axis) = self.designated.get(text) {
            values[axis] = 1.0;
            return EmbeddingVector::new(values);
        }
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        for v in values.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        EmbeddingVector::new(values)
    }
}

/// Embeddings endpoint of an OpenAI-compatible server.
pub struct HttpEmbedder {
    http: HttpBackend,
    model: String,
}

impl HttpEmbedder {
    pub fn new(http: HttpBackend, model: impl Into<String>) -> Self {
        Self {
            http,
            model: model.into(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let value = self
            .http
            .post("embeddings", json!({ "model": self.model, "input": text }))?;
        let values: Vec<f64> = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::Transport("response has no embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| ProviderError::Transport("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        EmbeddingVector::new(values)
    }
}
