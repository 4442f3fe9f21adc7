//! The inference loop: hypotheses with a prior, a likelihood row per
//! hypothesis over the candidate actions, and a posterior update from the
//! observed action that feeds the next step's prior.

pub mod prompts;
mod script;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{Distribution, DistributionError};
use crate::env::{EnvError, Restaurant, RoomGraph, TrajectoryDef};
use crate::oracle::{OracleError, PreferenceOrdering};
use crate::provider::{
    complete_parsed, parse_distribution, parse_hypotheses, ChatBackend, ProviderError, Transcript,
};

pub use prompts::{BaselineKind, EngineSettings, Prompter};
pub use script::{oracle_script, ScriptOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("the observation has zero likelihood under every hypothesis")]
    DegeneratePosterior,
    #[error("invalid hypothesis set: {0}")]
    InvalidHypotheses(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: usize,
    pub text: String,
    /// Set when the hypothesis is a strict ranking of the restaurants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<PreferenceOrdering>,
}

/// Hypotheses with ids `0..n` in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet(Vec<Hypothesis>);

impl HypothesisSet {
    pub fn new(items: Vec<(String, Option<PreferenceOrdering>)>) -> Result<Self, EngineError> {
        if items.is_empty() {
            return Err(EngineError::InvalidHypotheses("no hypotheses".into()));
        }
        let mut out = Vec::with_capacity(items.len());
        for (id, (text, ordering)) in items.into_iter().enumerate() {
            let text = text.trim().to_string();
            if text.is_empty() {
                return Err(EngineError::InvalidHypotheses(format!("hypothesis {id} has no text")));
            }
            out.push(Hypothesis { id, text, ordering });
        }
        Ok(Self(out))
    }

    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Result<Self, EngineError> {
        Self::new(texts.into_iter().map(|t| (t.into(), None)).collect())
    }

    /// One hypothesis per strict ordering, described in words.
    pub fn from_orderings(orderings: &[PreferenceOrdering]) -> Result<Self, EngineError> {
        Self::new(orderings.iter().map(|o| (o.describe(), Some(o.clone()))).collect())
    }

    pub fn orderings(graph: &RoomGraph) -> Self {
        Self::from_orderings(&PreferenceOrdering::all(graph)).expect("a graph has restaurants")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Hypothesis] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Hypothesis> {
        self.0.iter()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.0.iter().map(|h| h.text.as_str()).collect()
    }
}

/// `P(action | hypothesis)`: one row per hypothesis over shared columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodMatrix {
    pub actions: Vec<String>,
    pub rows: Vec<Distribution>,
}

impl LikelihoodMatrix {
    pub fn new(actions: Vec<String>, rows: Vec<Distribution>) -> Result<Self, EngineError> {
        if actions.is_empty() || rows.is_empty() {
            return Err(EngineError::DimensionMismatch("empty likelihood matrix".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != actions.len()) {
            return Err(EngineError::DimensionMismatch(format!(
                "row {i} has {} entries for {} actions",
                r.len(),
                actions.len()
            )));
        }
        Ok(Self { actions, rows })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.probs()[j]).collect()
    }
}

/// `posterior_i ∝ prior_i · Σ_j w_j · M_ij`.
pub fn posterior_update_math(
    prior: &Distribution,
    matrix: &LikelihoodMatrix,
    obs_weights: &Distribution,
) -> Result<Distribution, EngineError> {
    if prior.len() != matrix.rows.len() {
        return Err(EngineError::DimensionMismatch(format!(
            "prior has {} entries for {} rows",
            prior.len(),
            matrix.rows.len()
        )));
    }
    if obs_weights.len() != matrix.actions.len() {
        return Err(EngineError::DimensionMismatch(format!(
            "{} observation weights for {} actions",
            obs_weights.len(),
            matrix.actions.len()
        )));
    }
    let weights: Vec<f64> = matrix
        .rows
        .iter()
        .zip(prior.probs())
        .map(|(row, p)| {
            let l: f64 = row.probs().iter().zip(obs_weights.probs()).map(|(m, w)| w * m).sum();
            p * l
        })
        .collect();
    Distribution::from_weights(weights).map_err(|e| match e {
        DistributionError::ZeroMass(_) => EngineError::DegeneratePosterior,
        other => other.into(),
    })
}

/// Single observed action at column `index`.
pub fn posterior_update_indicator(
    prior: &Distribution,
    matrix: &LikelihoodMatrix,
    index: usize,
) -> Result<Distribution, EngineError> {
    let w = Distribution::one_hot(matrix.actions.len(), index)
        .map_err(|_| EngineError::DimensionMismatch(format!("observed column {index} out of range")))?;
    posterior_update_math(prior, matrix, &w)
}

/// The action the agent took, as known to the observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedAction {
    pub label: String,
    /// Column of the action in the candidate list, when it is one of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    /// Weights over the candidate columns.
    pub weights: Distribution,
}

impl ObservedAction {
    pub fn indicator(label: impl Into<String>, index: usize, n_actions: usize) -> Result<Self, EngineError> {
        Ok(Self {
            label: label.into(),
            index: Some(index),
            weights: Distribution::one_hot(n_actions, index)?,
        })
    }
}

/// Everything the observer sees at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInput {
    pub timestep: usize,
    pub context: String,
    pub actions: Vec<String>,
    pub observed: ObservedAction,
}

/// Step inputs for a restaurant trajectory: the legal actions in the
/// agent's room form the candidate columns.
pub fn restaurant_steps(graph: &RoomGraph, traj: &TrajectoryDef) -> Result<Vec<StepInput>, EngineError> {
    let mut earlier = Vec::new();
    let mut learned: Vec<(Restaurant, bool)> = Vec::new();
    let mut out = Vec::new();
    for step in traj.replay(graph)? {
        let actions: Vec<String> = step.legal.iter().map(|a| a.describe()).collect();
        let n = actions.len();
        out.push(StepInput {
            timestep: step.timestep,
            context: prompts::render_observation(graph, &step.observation, &earlier, &learned),
            actions,
            observed: ObservedAction::indicator(step.action.describe(), step.action_index, n)?,
        });
        earlier.push(step.room);
        for (r, open) in &step.observation.visible {
            match learned.iter_mut().find(|(seen, _)| seen == r) {
                Some(entry) => entry.1 = *open,
                None => learned.push((r.clone(), *open)),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub timestep: usize,
    pub state_context: String,
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<LikelihoodMatrix>,
    pub observed: ObservedAction,
    pub prior: Distribution,
    pub posterior: Distribution,
    /// Bayes-rule posterior, kept when the model computed `posterior`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub math_posterior: Option<Distribution>,
    /// Max absolute difference between `posterior` and `math_posterior`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_posterior_error: Option<f64>,
    pub raw: Vec<Transcript>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub timestep: usize,
    pub error: String,
    pub transcripts: Vec<Transcript>,
}

/// Records of the steps that completed, and the failure that stopped the
/// run, if any.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub steps: Vec<StepRecord>,
    pub failure: Option<StepFailure>,
}

impl TrajectoryOutcome {
    pub fn final_posterior(&self) -> Option<&Distribution> {
        self.steps.last().map(|s| &s.posterior)
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Bayes rule on the elicited matrix.
    Math,
    /// The model is shown prior and matrix and computes the posterior.
    Llm,
}

/// A model configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LaipFull,
    LaipLcp,
    LaipSingleCot,
    GenericCot,
    ZeroShot,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::LaipFull,
        Mode::LaipLcp,
        Mode::LaipSingleCot,
        Mode::GenericCot,
        Mode::ZeroShot,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Mode::LaipFull => "laip-full",
            Mode::LaipLcp => "laip-lcp",
            Mode::LaipSingleCot => "laip-single-cot",
            Mode::GenericCot => "generic-cot",
            Mode::ZeroShot => "zero-shot",
        }
    }

    /// The update used by the multi-call configurations.
    pub fn update_mode(self) -> Option<UpdateMode> {
        match self {
            Mode::LaipFull => Some(UpdateMode::Math),
            Mode::LaipLcp => Some(UpdateMode::Llm),
            _ => None,
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Mode::LaipSingleCot => Some(BaselineKind::SingleCot),
            Mode::GenericCot => Some(BaselineKind::GenericCot),
            Mode::ZeroShot => Some(BaselineKind::ZeroShot),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

pub struct Engine<'a> {
    backend: &'a dyn ChatBackend,
    prompter: Prompter,
}

impl<'a> Engine<'a> {
    pub fn new(backend: &'a dyn ChatBackend, prompter: Prompter) -> Self {
        Self { backend, prompter }
    }

    pub fn prompter(&self) -> &Prompter {
        &self.prompter
    }

    pub fn backend(&self) -> &'a dyn ChatBackend {
        self.backend
    }

    fn retries(&self) -> usize {
        self.prompter.settings.max_retries
    }

    pub(crate) fn call<T>(
        &self,
        request: crate::provider::CompletionRequest,
        purpose: &str,
        count: usize,
        log: &mut Vec<Transcript>,
        parse: impl Fn(&str) -> Result<T, ProviderError>,
    ) -> Result<T, EngineError> {
        match complete_parsed(self.backend, request, purpose, count, self.retries(), parse) {
            Ok((v, t)) => {
                log.extend(t);
                Ok(v)
            }
            Err((e, t)) => {
                log.extend(t);
                Err(e.into())
            }
        }
    }

    /// Elicits `n` hypotheses with prior masses. In uniform mode the masses
    /// are replaced with `1/n`.
    pub fn generate_prior(
        &self,
        prompt: &str,
        n: usize,
        uniform: bool,
        log: &mut Vec<Transcript>,
    ) -> Result<(HypothesisSet, Distribution), EngineError> {
        let request = self.prompter.hypotheses_request(prompt);
        let (texts, prior) = self.call(request, "hypotheses", n, log, |t| parse_hypotheses(t, n))?;
        let set = HypothesisSet::from_texts(texts)?;
        let prior = if uniform { Distribution::uniform(n)? } else { prior };
        Ok((set, prior))
    }

    /// One row of the likelihood matrix. A single candidate needs no call.
    pub fn elicit_likelihood_row(
        &self,
        context: &str,
        hypothesis: &Hypothesis,
        actions: &[String],
        log: &mut Vec<Transcript>,
    ) -> Result<Distribution, EngineError> {
        match actions.len() {
            0 => Err(EngineError::DimensionMismatch("no candidate actions".into())),
            1 => Ok(Distribution::one_hot(1, 0)?),
            k => {
                let request = self.prompter.likelihood_request(context, hypothesis, actions);
                self.call(request, "likelihood", k, log, |t| parse_distribution(t, k))
            }
        }
    }

    /// One independent call per hypothesis; rows are assembled in id order.
    pub fn elicit_matrix(
        &self,
        context: &str,
        hypotheses: &HypothesisSet,
        actions: &[String],
        log: &mut Vec<Transcript>,
    ) -> Result<LikelihoodMatrix, EngineError> {
        let one = |h: &Hypothesis| {
            let mut own = Vec::new();
            let row = self.elicit_likelihood_row(context, h, actions, &mut own);
            (row, own)
        };
        let results: Vec<_> = if self.prompter.settings.parallel {
            hypotheses.as_slice().par_iter().map(one).collect()
        } else {
            hypotheses.iter().map(one).collect()
        };
        let mut rows = Vec::with_capacity(results.len());
        let mut first_error = None;
        for (row, own) in results {
            log.extend(own);
            match row {
                Ok(r) => rows.push(r),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        if let Some(e) = first_error {
            return Err(e);
        }
        LikelihoodMatrix::new(actions.to_vec(), rows)
    }

    pub fn posterior_update_llm(
        &self,
        context: &str,
        hypotheses: &HypothesisSet,
        prior: &Distribution,
        matrix: &LikelihoodMatrix,
        observed: &str,
        log: &mut Vec<Transcript>,
    ) -> Result<Distribution, EngineError> {
        let n = hypotheses.len();
        let request = self
            .prompter
            .posterior_request(context, hypotheses.as_slice(), prior, matrix, observed);
        self.call(request, "posterior", n, log, |t| parse_distribution(t, n))
    }

    /// Runs one step: elicit the matrix, then update.
    pub fn step(
        &self,
        input: &StepInput,
        hypotheses: &HypothesisSet,
        prior: &Distribution,
        mode: UpdateMode,
        log: &mut Vec<Transcript>,
    ) -> Result<StepRecord, EngineError> {
        let matrix = self.elicit_matrix(&input.context, hypotheses, &input.actions, log)?;
        let math = posterior_update_math(prior, &matrix, &input.observed.weights)?;
        let (posterior, math_posterior, err) = match mode {
            UpdateMode::Math => (math, None, None),
            UpdateMode::Llm => {
                let llm = self.posterior_update_llm(
                    &input.context,
                    hypotheses,
                    prior,
                    &matrix,
                    &input.observed.label,
                    log,
                )?;
                let err = llm.max_abs_diff(&math);
                (llm, Some(math), Some(err))
            }
        };
        Ok(StepRecord {
            timestep: input.timestep,
            state_context: input.context.clone(),
            actions: input.actions.clone(),
            matrix: Some(matrix),
            observed: input.observed.clone(),
            prior: prior.clone(),
            posterior,
            math_posterior,
            llm_posterior_error: err,
            raw: std::mem::take(log),
        })
    }

    /// Steps through `inputs` in order, feeding each posterior forward as
    /// the next prior. Stops at the first failed step.
    pub fn run_trajectory(
        &self,
        inputs: &[StepInput],
        hypotheses: &HypothesisSet,
        prior: &Distribution,
        mode: UpdateMode,
    ) -> TrajectoryOutcome {
        let mut outcome = TrajectoryOutcome::default();
        if prior.len() != hypotheses.len() {
            outcome.failure = Some(StepFailure {
                timestep: 0,
                error: EngineError::DimensionMismatch(format!(
                    "prior has {} entries for {} hypotheses",
                    prior.len(),
                    hypotheses.len()
                ))
                .to_string(),
                transcripts: Vec::new(),
            });
            return outcome;
        }
        let mut prior = prior.clone();
        for input in inputs {
            let mut log = Vec::new();
            match self.step(input, hypotheses, &prior, mode, &mut log) {
                Ok(record) => {
                    prior = record.posterior.clone();
                    outcome.steps.push(record);
                }
                Err(e) => {
                    outcome.failure = Some(StepFailure {
                        timestep: input.timestep,
                        error: e.to_string(),
                        transcripts: log,
                    });
                    break;
                }
            }
        }
        outcome
    }
}
