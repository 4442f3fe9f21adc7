//! Scripted backends that answer every request of a restaurant run with
//! the Bayes-optimal observer's numbers.

use serde_json::json;

use super::prompts::displayed_prob;
use super::{
    posterior_update_indicator, restaurant_steps, EngineError, HypothesisSet, LikelihoodMatrix, Mode,
    Prompter,
};
use crate::distribution::Distribution;
use crate::env::{RoomGraph, TrajectoryDef};
use crate::oracle::{trajectory_policies, NoiseParam, PreferenceOrdering};
use crate::provider::{parse_distribution, ScriptedBackend};

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptOptions {
    pub eps: NoiseParam,
    pub mode: Mode,
}

impl Default for ScriptOptions {
    fn default() -> Self {
        Self {
            eps: NoiseParam::default(),
            mode: Mode::LaipFull,
        }
    }
}

/// Bayes update over the numbers as the prompt shows them, so the reply
/// depends only on the request.
fn displayed_update(prior: &Distribution, matrix: &LikelihoodMatrix, index: usize) -> Result<Distribution, EngineError> {
    let w = prior
        .probs()
        .iter()
        .zip(&matrix.rows)
        .map(|(&p, row)| displayed_prob(p) * displayed_prob(row.probs()[index]))
        .collect();
    Distribution::from_weights(w).map_err(|_| EngineError::DegeneratePosterior)
}

fn probabilities_json(d: &Distribution) -> String {
    json!({ "probabilities": d.probs() }).to_string()
}

/// Digest-keyed replies for exactly the requests `prompter` will build on
/// `traj`: likelihood rows are the forward policy of each hypothesis's
/// ordering, and every posterior the model is asked for is the Bayes update
/// of the prior and likelihoods as displayed (four decimals). Each hypothesis must carry an ordering.
pub fn oracle_script(
    prompter: &Prompter,
    graph: &RoomGraph,
    traj: &TrajectoryDef,
    hypotheses: &HypothesisSet,
    prior: &Distribution,
    opts: &ScriptOptions,
) -> Result<ScriptedBackend, EngineError> {
    let orderings: Vec<PreferenceOrdering> = hypotheses
        .iter()
        .map(|h| {
            h.ordering.clone().ok_or_else(|| {
                EngineError::InvalidHypotheses(format!("hypothesis {} has no ordering", h.id))
            })
        })
        .collect::<Result<_, _>>()?;
    if prior.len() != hypotheses.len() {
        return Err(EngineError::DimensionMismatch(format!(
            "prior has {} entries for {} hypotheses",
            prior.len(),
            hypotheses.len()
        )));
    }
    let n = hypotheses.len();
    let inputs = restaurant_steps(graph, traj)?;
    let policies = trajectory_policies(graph, traj, &orderings, opts.eps)?;
    let replay = traj.replay(graph)?;

    let mut backend = ScriptedBackend::new(format!("oracle-script:{}", traj.id));
    let mut prior = prior.clone();
    for ((input, step), legal) in inputs.iter().zip(&policies).zip(replay.iter().map(|r| &r.legal)) {
        let mut rows = Vec::with_capacity(n);
        for (h, policy) in hypotheses.iter().zip(&step.policies) {
            if policy.actions.len() != legal.len() || legal.iter().any(|a| !policy.actions.contains(a)) {
                return Err(EngineError::DimensionMismatch(format!(
                    "policy actions differ from the legal set at step {}",
                    step.timestep
                )));
            }
            let row = Distribution::new(legal.iter().map(|a| policy.prob_of(a)).collect())?;
            let row = if legal.len() > 1 {
                let text = probabilities_json(&row);
                if opts.mode.update_mode().is_some() {
                    backend.insert(&prompter.likelihood_request(&input.context, h, &input.actions), &text);
                }
                // the engine sees the row only through the parser
                parse_distribution(&text, legal.len())?
            } else {
                row
            };
            rows.push(row);
        }
        let matrix = LikelihoodMatrix::new(input.actions.clone(), rows)?;
        let index = input.observed.index.expect("restaurant steps observe a column");
        let request = match opts.mode {
            Mode::LaipFull => None,
            Mode::LaipLcp => Some(prompter.posterior_request(
                &input.context,
                hypotheses.as_slice(),
                &prior,
                &matrix,
                &input.observed.label,
            )),
            m => Some(prompter.baseline_request(
                m.baseline().expect("single-call mode"),
                &input.context,
                hypotheses.as_slice(),
                &prior,
                &input.actions,
                &input.observed.label,
            )),
        };
        prior = match request {
            None => posterior_update_indicator(&prior, &matrix, index)?,
            Some(request) => {
                let text = probabilities_json(&displayed_update(&prior, &matrix, index)?);
                backend.insert(&request, &text);
                parse_distribution(&text, n)?
            }
        };
    }
    Ok(backend)
}
