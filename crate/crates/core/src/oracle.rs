//! Bayes-optimal observer for the restaurant world.
//!
//! The observed agent holds a belief that each restaurant is open (0.95 until
//! it has been seen, then exactly 0 or 1), heads for its favourite restaurant
//! along the shortest path with probability `P(open) * (1 - eps)`, falls back
//! to the next-ranked restaurant with the believed-closed remainder, and
//! takes a uniformly random legal action with probability `eps`. The
//! observer inverts this policy over the strict preference orderings.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::{Distribution, DistributionError};
use crate::env::{self, Action, EnvError, Observation, Restaurant, RoomGraph, RoomId, TrajectoryDef};

/// Prior belief that an unseen restaurant is open.
pub const DEFAULT_OPEN_PROB: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("ordering must rank every restaurant exactly once: {0}")]
    InvalidOrdering(String),
    #[error("noise parameter must lie in [0, 1): {0}")]
    InvalidNoise(f64),
    #[error("no legal action in {0}")]
    NoLegalActions(RoomId),
    #[error("trajectory action {action} at step {step} has zero probability under every policy")]
    IllegalTrajectory { step: usize, action: Action },
    #[error("prior has {prior} entries but there are {hypotheses} orderings")]
    DimensionMismatch { prior: usize, hypotheses: usize },
    #[error("all trajectory likelihoods are zero")]
    DegeneratePosterior,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// The agent's believed probability that each restaurant is open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBelief {
    open_prob: BTreeMap<Restaurant, f64>,
}

pub fn init_belief(graph: &RoomGraph) -> AgentBelief {
    AgentBelief {
        open_prob: graph
            .restaurants()
            .map(|r| (r.clone(), DEFAULT_OPEN_PROB))
            .collect(),
    }
}

/// Visible restaurants collapse to 1 (open) or 0 (closed).
pub fn update_belief(belief: &AgentBelief, obs: &Observation) -> AgentBelief {
    let mut next = belief.clone();
    for (r, open) in &obs.visible {
        next.open_prob
            .insert(r.clone(), if *open { 1.0 } else { 0.0 });
    }
    next
}

impl AgentBelief {
    pub fn from_map(open_prob: BTreeMap<Restaurant, f64>) -> Self {
        Self { open_prob }
    }

    pub fn open_prob(&self, r: &Restaurant) -> f64 {
        self.open_prob.get(r).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Restaurant, f64)> + '_ {
        self.open_prob.iter().map(|(r, &p)| (r, p))
    }

    pub fn len(&self) -> usize {
        self.open_prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open_prob.is_empty()
    }
}

/// Strict ranking of every restaurant, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreferenceOrdering {
    ranking: Vec<Restaurant>,
}

impl PreferenceOrdering {
    pub fn new(graph: &RoomGraph, ranking: Vec<Restaurant>) -> Result<Self, OracleError> {
        let mut expected: Vec<_> = graph.restaurants().cloned().collect();
        let mut got = ranking.clone();
        expected.sort();
        got.sort();
        if expected != got {
            let names: Vec<_> = ranking.iter().map(Restaurant::name).collect();
            return Err(OracleError::InvalidOrdering(names.join(" > ")));
        }
        Ok(Self { ranking })
    }

    /// Parses `"Japanese > Chinese > Mexican"`.
    pub fn parse(graph: &RoomGraph, text: &str) -> Result<Self, OracleError> {
        let ranking = text
            .split('>')
            .map(|s| {
                let s = s.trim();
                graph
                    .restaurant(s)
                    .cloned()
                    .ok_or_else(|| OracleError::InvalidOrdering(text.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(graph, ranking)
    }

    /// Every strict ordering, in lexicographic order of the restaurants'
    /// declaration indices.
    pub fn all(graph: &RoomGraph) -> Vec<Self> {
        let items: Vec<_> = graph.restaurants().cloned().collect();
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..items.len()).collect();
        loop {
            out.push(Self {
                ranking: idx.iter().map(|&i| items[i].clone()).collect(),
            });
            if !next_permutation(&mut idx) {
                break;
            }
        }
        out
    }

    pub fn ranking(&self) -> &[Restaurant] {
        &self.ranking
    }

    /// Natural-language statement used as hypothesis text.
    pub fn describe(&self) -> String {
        match self.ranking.as_slice() {
            [] => "The agent has no restaurant to prefer.".to_string(),
            [only] => format!("The agent prefers {only} food."),
            [first, rest @ ..] => {
                let rest: Vec<_> = rest.iter().map(Restaurant::name).collect();
                format!(
                    "The agent prefers {first} food the most, then {}.",
                    rest.join(", then ")
                )
            }
        }
    }
}

impl fmt::Display for PreferenceOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.ranking.iter().map(Restaurant::name).collect();
        f.write_str(&names.join(" > "))
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Probability of a random (non goal-directed) action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NoiseParam(f64);

impl NoiseParam {
    pub fn new(epsilon: f64) -> Result<Self, OracleError> {
        if (0.0..1.0).contains(&epsilon) {
            Ok(Self(epsilon))
        } else {
            Err(OracleError::InvalidNoise(epsilon))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for NoiseParam {
    fn default() -> Self {
        Self(DEFAULT_EPSILON)
    }
}

impl TryFrom<f64> for NoiseParam {
    type Error = OracleError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<NoiseParam> for f64 {
    fn from(n: NoiseParam) -> f64 {
        n.0
    }
}

/// Action distribution of the rational agent in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// Moves in ascending room order, then `Eat` for each co-located
    /// restaurant believed open.
    pub actions: Vec<Action>,
    pub probs: Distribution,
}

impl Policy {
    pub fn prob_of(&self, action: &Action) -> f64 {
        self.actions
            .iter()
            .position(|a| a == action)
            .and_then(|i| self.probs.get(i))
            .unwrap_or(0.0)
    }
}

pub fn forward_policy(
    graph: &RoomGraph,
    belief: &AgentBelief,
    ordering: &PreferenceOrdering,
    room: RoomId,
    eps: NoiseParam,
) -> Result<Policy, OracleError> {
    let mut actions: Vec<Action> = graph.neighbors(room)?.map(Action::Move).collect();
    actions.extend(
        graph
            .restaurants_at(room)
            .filter(|r| belief.open_prob(r) > 0.0)
            .map(|r| Action::Eat(r.clone())),
    );
    if actions.is_empty() {
        return Err(OracleError::NoLegalActions(room));
    }

    let mut weights = vec![0.0; actions.len()];
    let mut mass = 1.0 - eps.value();
    for r in ordering.ranking() {
        let p = belief.open_prob(r);
        if p <= 0.0 {
            continue;
        }
        let step = if graph.room_of(r) == Some(room) {
            Action::Eat(r.clone())
        } else {
            match env::shortest_path(graph, room, r) {
                Ok(path) => Action::Move(path[0]),
                Err(EnvError::Unreachable { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        };
        let i = actions
            .iter()
            .position(|a| *a == step)
            .expect("first path step is a candidate action");
        weights[i] += mass * p;
        mass *= 1.0 - p;
        if mass == 0.0 {
            break;
        }
    }

    // Noise plus any mass left when every remaining goal is believed closed
    // (the whole of 1 - eps when no goal is viable) is spread uniformly.
    let spread = (eps.value() + mass) / actions.len() as f64;
    for w in &mut weights {
        *w += spread;
    }
    let probs = Distribution::from_weights(weights)?;
    Ok(Policy { actions, probs })
}

/// Beliefs held at each step of `traj`, after seeing the current room and
/// before acting. Independent of the agent's preferences.
pub fn belief_trajectory(graph: &RoomGraph, traj: &TrajectoryDef) -> Result<Vec<AgentBelief>, OracleError> {
    let mut belief = init_belief(graph);
    let mut out = Vec::with_capacity(traj.actions.len());
    for step in traj.replay(graph)? {
        belief = update_belief(&belief, &step.observation);
        out.push(belief.clone());
    }
    Ok(out)
}

/// Per-step policies for each ordering along a trajectory.
#[derive(Debug, Clone)]
pub struct StepPolicies {
    pub timestep: usize,
    pub room: RoomId,
    pub observed: Action,
    pub policies: Vec<Policy>,
}

pub fn trajectory_policies(
    graph: &RoomGraph,
    traj: &TrajectoryDef,
    orderings: &[PreferenceOrdering],
    eps: NoiseParam,
) -> Result<Vec<StepPolicies>, OracleError> {
    let steps = traj.replay(graph)?;
    let beliefs = belief_trajectory(graph, traj)?;
    steps
        .into_iter()
        .zip(beliefs)
        .map(|(step, belief)| {
            let policies = orderings
                .iter()
                .map(|o| forward_policy(graph, &belief, o, step.room, eps))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(StepPolicies {
                timestep: step.timestep,
                room: step.room,
                observed: step.action,
                policies,
            })
        })
        .collect()
}

/// Product of per-step policy probabilities of the observed actions.
pub fn trajectory_likelihood(
    graph: &RoomGraph,
    ordering: &PreferenceOrdering,
    traj: &TrajectoryDef,
    eps: NoiseParam,
) -> Result<f64, OracleError> {
    let mut likelihood = 1.0;
    for step in trajectory_policies(graph, traj, std::slice::from_ref(ordering), eps)? {
        let p = step.policies[0].prob_of(&step.observed);
        if !step.policies[0].actions.contains(&step.observed) {
            return Err(OracleError::IllegalTrajectory {
                step: step.timestep,
                action: step.observed,
            });
        }
        likelihood *= p;
    }
    Ok(likelihood)
}

pub fn optimal_posterior(
    graph: &RoomGraph,
    traj: &TrajectoryDef,
    orderings: &[PreferenceOrdering],
    prior: &Distribution,
    eps: NoiseParam,
) -> Result<Distribution, OracleError> {
    if prior.len() != orderings.len() {
        return Err(OracleError::DimensionMismatch {
            prior: prior.len(),
            hypotheses: orderings.len(),
        });
    }
    let weights = orderings
        .iter()
        .zip(prior.probs())
        .map(|(o, &p)| Ok(p * trajectory_likelihood(graph, o, traj, eps)?))
        .collect::<Result<Vec<f64>, OracleError>>()?;
    Distribution::from_weights(weights).map_err(|e| match e {
        DistributionError::ZeroMass(_) => OracleError::DegeneratePosterior,
        other => other.into(),
    })
}

/// Optimal posterior over all orderings with a uniform prior and the
/// default noise.
pub fn default_posterior(graph: &RoomGraph, traj: &TrajectoryDef) -> Result<Distribution, OracleError> {
    let orderings = PreferenceOrdering::all(graph);
    let prior = Distribution::uniform(orderings.len())?;
    optimal_posterior(graph, traj, &orderings, &prior, NoiseParam::default())
}
