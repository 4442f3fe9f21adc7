//! Normalized probability vectors over an indexed set of outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sum tolerance accepted by [`Distribution::new`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution must have at least one entry")]
    Empty,
    #[error("entry {index} is not a finite non-negative number: {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("weights sum to {0}, cannot normalize")]
    ZeroMass(f64),
    #[error("entries sum to {0}, expected 1")]
    NotNormalized(f64),
}

/// A point on the probability simplex.
///
/// Every constructor guarantees finite, non-negative entries summing to one
/// within [`SIMPLEX_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Wraps already-normalized probabilities.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        validate_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(DistributionError::NotNormalized(sum));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DistributionError> {
        validate_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 || !sum.is_finite() {
            return Err(DistributionError::ZeroMass(sum));
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn uniform(n: usize) -> Result<Self, DistributionError> {
        if n == 0 {
            return Err(DistributionError::Empty);
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn one_hot(n: usize, index: usize) -> Result<Self, DistributionError> {
        if n == 0 {
            return Err(DistributionError::Empty);
        }
        if index >= n {
            return Err(DistributionError::InvalidEntry {
                index,
                value: 1.0,
            });
        }
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.0.get(i).copied()
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Total mass on the given indices (out-of-range indices are ignored).
    pub fn mass_on(&self, indices: &[usize]) -> f64 {
        indices.iter().filter_map(|&i| self.0.get(i)).sum()
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

fn validate_entries(values: &[f64]) -> Result<(), DistributionError> {
    if values.is_empty() {
        return Err(DistributionError::Empty);
    }
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(DistributionError::InvalidEntry { index, value });
        }
    }
    Ok(())
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = DistributionError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.0
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
