//! Inference when actions are free text.
//!
//! At each scene the model proposes candidate actions, every hypothesis
//! gets a likelihood row over them, and the actor's real choice is matched
//! to the candidates by softmax of embedding cosine similarity. The update
//! mixes the likelihood columns with those weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::baseline_step;
use crate::distribution::Distribution;
use crate::engine::prompts::{self, render, templates, EngineSettings, Prompter};
use crate::engine::{
    posterior_update_math, Engine, EngineError, HypothesisSet, LikelihoodMatrix, Mode, ObservedAction,
    StepFailure, StepInput, TrajectoryOutcome,
};
use crate::env::EnvError;
use crate::provider::{
    complete_parsed, cosine, parse_action_list, ChatBackend, CompletionRequest, Embedder, EmbeddingVector,
    Message, ProviderError, Transcript,
};

pub const DEFAULT_PROPOSALS: usize = 6;
pub const DEFAULT_TAU: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeAction {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector>,
}

impl FreeAction {
    pub fn new(text: impl Into<String>) -> Result<Self, EngineError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(EngineError::InvalidHypotheses("empty action text".into()));
        }
        Ok(Self { text, embedding: None })
    }

    pub fn embed(&mut self, embedder: &dyn Embedder) -> Result<&EmbeddingVector, ProviderError> {
        if self.embedding.is_none() {
            self.embedding = Some(embedder.embed(&self.text)?);
        }
        Ok(self.embedding.as_ref().expect("just set"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftObservation {
    pub text: String,
    pub similarities: Vec<f64>,
    pub weights: Distribution,
    pub temperature: f64,
}

/// `softmax(s / tau)`.
pub fn softmax_weights(similarities: &[f64], tau: f64) -> Result<Distribution, EngineError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(EngineError::DimensionMismatch(format!("temperature must be positive, got {tau}")));
    }
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = similarities.iter().map(|s| ((s - max) / tau).exp()).collect();
    Ok(Distribution::from_weights(w)?)
}

/// Asks for `k` distinct candidate actions for the scene.
pub fn propose_actions(
    engine: &Engine<'_>,
    context: &str,
    k: usize,
    log: &mut Vec<Transcript>,
) -> Result<Vec<FreeAction>, EngineError> {
    let request = engine.prompter().propose_actions_request(context, k);
    let texts = engine.call(request, "propose-actions", k, log, |t| parse_action_list(t, k))?;
    texts.into_iter().map(FreeAction::new).collect()
}

/// Embeds the observation and any candidate without an embedding, then
/// weights candidates by similarity.
pub fn similarity_weights(
    embedder: &dyn Embedder,
    obs: &str,
    candidates: &mut [FreeAction],
    tau: f64,
) -> Result<SoftObservation, EngineError> {
    if candidates.is_empty() {
        return Err(EngineError::DimensionMismatch("no candidate actions".into()));
    }
    let target = embedder.embed(obs)?;
    candidates
        .par_iter_mut()
        .map(|c| c.embed(embedder).map(|_| ()))
        .collect::<Result<(), _>>()?;
    let similarities: Vec<f64> = candidates
        .iter()
        .map(|c| cosine(&target, c.embedding.as_ref().expect("embedded above")))
        .collect();
    Ok(SoftObservation {
        text: obs.to_string(),
        weights: softmax_weights(&similarities, tau)?,
        similarities,
        temperature: tau,
    })
}

pub fn soft_posterior_update(
    prior: &Distribution,
    matrix: &LikelihoodMatrix,
    soft: &SoftObservation,
) -> Result<Distribution, EngineError> {
    posterior_update_math(prior, matrix, &soft.weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub text: String,
    /// The actor's recorded choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioHypothesis {
    pub text: String,
    #[serde(default)]
    pub reference_laip: Option<f64>,
    #[serde(default)]
    pub reference_zero_shot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub actor: String,
    pub observer: String,
    pub actor_persona: String,
    pub situation: String,
    pub scenes: Vec<Scene>,
    #[serde(default)]
    pub hypotheses: Vec<ScenarioHypothesis>,
}

const ALICE: &str = include_str!("../data/alice.toml");

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, EnvError> {
        let s: Scenario = toml::from_str(text).map_err(|e| EnvError::Parse {
            what: "scenario".into(),
            message: e.to_string(),
        })?;
        if s.scenes.is_empty() {
            return Err(EnvError::Validation("scenario has no scenes".into()));
        }
        Ok(s)
    }

    pub fn alice() -> Self {
        Self::from_toml(ALICE).expect("bundled scenario parses")
    }

    pub fn hypothesis_set(&self) -> Result<HypothesisSet, EngineError> {
        HypothesisSet::from_texts(self.hypotheses.iter().map(|h| h.text.clone()))
    }

    pub fn situation(&self) -> &str {
        self.situation.trim()
    }

    pub fn hypotheses_prompt(&self, n: usize) -> String {
        prompts::open_hypotheses_prompt(self.situation(), &self.actor, n)
    }

    /// The hypothesis table as a numbered list with equal percentages, in
    /// the format the hypothesis prompt asks for.
    pub fn fixture_reply(&self) -> String {
        let pct = 100.0 / self.hypotheses.len().max(1) as f64;
        self.hypotheses
            .iter()
            .enumerate()
            .map(|(i, h)| format!("{}. {} ({pct}%)", i + 1, h.text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn scene_context(&self, index: usize) -> String {
        format!("Scene {} of {}: {}", index + 1, self.scenes.len(), self.scenes[index].text.trim())
    }

    pub fn actor_request(&self, index: usize, settings: &EngineSettings) -> CompletionRequest {
        let user = render(
            templates::ACTOR,
            &[
                ("actor", &self.actor),
                ("persona", &self.actor_persona),
                ("scene", self.scenes[index].text.trim()),
            ],
        );
        CompletionRequest::new(settings.model_id.clone(), vec![Message::user(user)])
            .with_temperature(settings.hypothesis_temperature)
            .with_seed(settings.seed)
            .with_max_tokens(settings.max_tokens)
    }
}

/// Fills every scene without a recorded choice by asking `actor` to play
/// the scenario's persona. Returns the transcripts.
pub fn simulate_actor(
    scenario: &mut Scenario,
    actor: &dyn ChatBackend,
    settings: &EngineSettings,
) -> Result<Vec<Transcript>, EngineError> {
    let mut log = Vec::new();
    for i in 0..scenario.scenes.len() {
        if scenario.scenes[i].observed.is_some() {
            continue;
        }
        let request = scenario.actor_request(i, settings);
        let parse = |t: &str| {
            let t = t.trim();
            if t.is_empty() {
                Err(ProviderError::ParseFailure("empty choice".into()))
            } else {
                Ok(t.to_string())
            }
        };
        match complete_parsed(actor, request, "actor", 1, settings.max_retries, parse) {
            Ok((choice, t)) => {
                log.extend(t);
                scenario.scenes[i].observed = Some(choice);
            }
            Err((e, _)) => return Err(e.into()),
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenEndedOptions {
    pub mode: Mode,
    pub proposals: usize,
    pub tau: f64,
}

impl Default for OpenEndedOptions {
    fn default() -> Self {
        Self {
            mode: Mode::LaipFull,
            proposals: DEFAULT_PROPOSALS,
            tau: DEFAULT_TAU,
        }
    }
}

fn scene_input(
    engine: &Engine<'_>,
    embedder: &dyn Embedder,
    scenario: &Scenario,
    index: usize,
    opts: &OpenEndedOptions,
    log: &mut Vec<Transcript>,
) -> Result<StepInput, EngineError> {
    let observed = scenario.scenes[index]
        .observed
        .clone()
        .ok_or_else(|| EngineError::InvalidHypotheses(format!("scene {} has no recorded choice", index + 1)))?;
    let context = scenario.scene_context(index);
    // zero-shot and generic CoT never see candidate actions
    if matches!(opts.mode, Mode::GenericCot | Mode::ZeroShot) {
        return Ok(StepInput {
            timestep: index,
            context,
            actions: vec![observed.clone()],
            observed: ObservedAction::indicator(observed, 0, 1)?,
        });
    }
    let mut candidates = propose_actions(engine, &context, opts.proposals, log)?;
    let soft = similarity_weights(embedder, &observed, &mut candidates, opts.tau)?;
    let actions: Vec<String> = candidates.into_iter().map(|c| c.text).collect();
    Ok(StepInput {
        timestep: index,
        context,
        observed: ObservedAction {
            index: actions.iter().position(|a| *a == observed),
            label: observed,
            weights: soft.weights,
        },
        actions,
    })
}

/// Runs every scene in order. The engine's system prompt should carry the
/// scenario's situation.
pub fn run_open_ended(
    engine: &Engine<'_>,
    embedder: &dyn Embedder,
    scenario: &Scenario,
    hypotheses: &HypothesisSet,
    prior: &Distribution,
    opts: &OpenEndedOptions,
) -> TrajectoryOutcome {
    let mut outcome = TrajectoryOutcome::default();
    let mut prior = prior.clone();
    for index in 0..scenario.scenes.len() {
        let mut log = Vec::new();
        let result = scene_input(engine, embedder, scenario, index, opts, &mut log).and_then(|input| {
            match (opts.mode.update_mode(), opts.mode.baseline()) {
                (Some(update), _) => engine.step(&input, hypotheses, &prior, update, &mut log),
                (None, Some(kind)) => baseline_step(engine, kind, &input, hypotheses, &prior, &mut log),
                (None, None) => unreachable!("every mode is multi-call or single-call"),
            }
        });
        match result {
            Ok(record) => {
                prior = record.posterior.clone();
                outcome.steps.push(record);
            }
            Err(e) => {
                outcome.failure = Some(StepFailure {
                    timestep: index,
                    error: e.to_string(),
                    transcripts: log,
                });
                break;
            }
        }
    }
    outcome
}

/// Prompter for an open-ended scenario: the situation is the system
/// message.
pub fn scenario_prompter(scenario: &Scenario, settings: EngineSettings) -> Prompter {
    Prompter::new(settings, Some(scenario.situation().to_string()))
}
