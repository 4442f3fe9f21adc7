//! Single-call configurations: one completion per timestep returns the
//! posterior directly.
//!
//! They share hypotheses, candidate actions and observation rendering with
//! the engine, so a baseline run pairs with a full run on the same inputs.

use crate::distribution::Distribution;
use crate::engine::{BaselineKind, Engine, EngineError, HypothesisSet, StepFailure, StepInput, StepRecord, TrajectoryOutcome};
use crate::provider::{parse_distribution, Transcript};

/// One baseline step; `prior` is shown to the model as the current belief.
pub fn baseline_step(
    engine: &Engine<'_>,
    kind: BaselineKind,
    input: &StepInput,
    hypotheses: &HypothesisSet,
    prior: &Distribution,
    log: &mut Vec<Transcript>,
) -> Result<StepRecord, EngineError> {
    let n = hypotheses.len();
    let request = engine.prompter().baseline_request(
        kind,
        &input.context,
        hypotheses.as_slice(),
        prior,
        &input.actions,
        &input.observed.label,
    );
    let posterior = engine.call(request, kind.purpose(), n, log, |t| parse_distribution(t, n))?;
    Ok(StepRecord {
        timestep: input.timestep,
        state_context: input.context.clone(),
        actions: input.actions.clone(),
        matrix: None,
        observed: input.observed.clone(),
        prior: prior.clone(),
        posterior,
        math_posterior: None,
        llm_posterior_error: None,
        raw: std::mem::take(log),
    })
}

pub fn run_baseline(
    engine: &Engine<'_>,
    kind: BaselineKind,
    inputs: &[StepInput],
    hypotheses: &HypothesisSet,
    prior: &Distribution,
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
        match baseline_step(engine, kind, input, hypotheses, &prior, &mut log) {
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

pub fn run_single_cot(engine: &Engine<'_>, inputs: &[StepInput], hypotheses: &HypothesisSet, prior: &Distribution) -> TrajectoryOutcome {
    run_baseline(engine, BaselineKind::SingleCot, inputs, hypotheses, prior)
}

pub fn run_generic_cot(engine: &Engine<'_>, inputs: &[StepInput], hypotheses: &HypothesisSet, prior: &Distribution) -> TrajectoryOutcome {
    run_baseline(engine, BaselineKind::GenericCot, inputs, hypotheses, prior)
}

pub fn run_zero_shot(engine: &Engine<'_>, inputs: &[StepInput], hypotheses: &HypothesisSet, prior: &Distribution) -> TrajectoryOutcome {
    run_baseline(engine, BaselineKind::ZeroShot, inputs, hypotheses, prior)
}
