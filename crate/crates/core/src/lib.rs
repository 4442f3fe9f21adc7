//! LLM-augmented Bayesian inverse planning.
//!
//! An observer keeps a posterior over hypotheses about an agent's
//! preferences. A language model proposes the hypotheses and, for each one,
//! the probability of every candidate action; the posterior is then updated
//! from the action the agent actually takes. The [`oracle`] module provides
//! the exact Bayes-optimal observer for the restaurant world, against which
//! every model configuration is scored.

pub mod baselines;
pub mod distribution;
pub mod engine;
pub mod env;
pub mod metrics;
pub mod open_ended;
pub mod oracle;
pub mod provider;
pub mod runner;

pub use distribution::{Distribution, DistributionError};
pub use env::{Action, Observation, Restaurant, RoomGraph, RoomId, TrajectoryDef, WorldState};
pub use oracle::{AgentBelief, NoiseParam, PreferenceOrdering};
pub use engine::{Engine, Hypothesis, HypothesisSet, LikelihoodMatrix, Mode, StepRecord, UpdateMode};
pub use metrics::MetricReport;
pub use open_ended::{FreeAction, SoftObservation};
pub use provider::{ChatBackend, EmbeddingVector, ProviderError};
pub use runner::{ExperimentConfig, RunRecord};
