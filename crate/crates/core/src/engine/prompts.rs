//! Prompt templates and the request builders that fill them.
//!
//! Template text lives in `templates/<version>/`; this module only
//! substitutes `{name}` placeholders.

use serde::{Deserialize, Serialize};

use super::{Hypothesis, LikelihoodMatrix};
use crate::distribution::Distribution;
use crate::env::{Observation, Restaurant, RoomGraph, RoomId};
use crate::provider::{CompletionRequest, Message, DEFAULT_MAX_RETRIES};

pub const TEMPLATE_VERSION: &str = "v1";

pub mod templates {
    pub const RESTAURANTS_SYSTEM: &str = include_str!("../../templates/v1/restaurants_system.txt");
    pub const OBSERVATION: &str = include_str!("../../templates/v1/observation.txt");
    pub const HYPOTHESES: &str = include_str!("../../templates/v1/hypotheses.txt");
    pub const OPEN_HYPOTHESES: &str = include_str!("../../templates/v1/open_hypotheses.txt");
    pub const LIKELIHOOD: &str = include_str!("../../templates/v1/likelihood.txt");
    pub const POSTERIOR: &str = include_str!("../../templates/v1/posterior.txt");
    pub const SINGLE_COT: &str = include_str!("../../templates/v1/single_cot.txt");
    pub const GENERIC_COT: &str = include_str!("../../templates/v1/generic_cot.txt");
    pub const ZERO_SHOT: &str = include_str!("../../templates/v1/zero_shot.txt");
    pub const PROPOSE_ACTIONS: &str = include_str!("../../templates/v1/propose_actions.txt");
    pub const ACTOR: &str = include_str!("../../templates/v1/actor.txt");
}

/// Replaces each `{key}` with its value. Unknown braces are left alone.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.trim_end().to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

/// "a", "a and b", "a, b, and c".
pub fn english_list<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [a] => a.as_ref().to_string(),
        [a, b] => format!("{} and {}", a.as_ref(), b.as_ref()),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

fn rooms(list: &[RoomId]) -> Vec<String> {
    list.iter().map(ToString::to_string).collect()
}

/// Environment rules shown as the system message of every restaurant-task
/// request.
pub fn restaurants_system(graph: &RoomGraph) -> String {
    let foods: Vec<String> = graph.restaurants().map(|r| format!("{} food", r.name())).collect();
    let food_list = format!("{} types of food: {}", graph.restaurant_count(), english_list(&foods));

    let mut room_rules = vec![format!("There are {} rooms:", graph.rooms().len())];
    for &room in graph.rooms() {
        let neighbors: Vec<RoomId> = graph.neighbors(room).map(Iterator::collect).unwrap_or_default();
        let mut line = format!("- {room} connects to {}.", english_list(&rooms(&neighbors)));
        for r in graph.restaurants_at(room) {
            line.push_str(&format!(" It has a {} restaurant in it.", r.name()));
        }
        room_rules.push(line);
    }

    let mut visibility = Vec::new();
    for r in graph.restaurants() {
        let (seen, unseen): (Vec<RoomId>, Vec<RoomId>) =
            graph.rooms().iter().partition(|&&room| graph.is_visible(r, room));
        visibility.push(format!(
            "- The {} restaurant is visible from {}.",
            r.name(),
            english_list(&rooms(&seen))
        ));
        if !unseen.is_empty() {
            visibility.push(format!(
                "- The {} restaurant is not visible from {}.",
                r.name(),
                english_list(&rooms(&unseen))
            ));
        }
    }

    render(
        templates::RESTAURANTS_SYSTEM,
        &[
            ("food_list", &food_list),
            ("room_rules", &room_rules.join("\n")),
            ("visibility_rules", &visibility.join("\n")),
        ],
    )
}

/// Rooms the agent passed through before this step and what it learned
/// there about restaurants it cannot see now.
fn render_history(earlier: &[RoomId], learned: &[(Restaurant, bool)], obs: &Observation) -> String {
    if earlier.is_empty() {
        return "This is where the agent starts.".to_string();
    }
    let path: Vec<String> = earlier.iter().map(ToString::to_string).collect();
    let mut text = format!("Before this, the agent was in {}.", path.join(", then "));
    let unseen: Vec<String> = learned
        .iter()
        .filter(|(r, _)| !obs.visible.iter().any(|(v, _)| v == r))
        .map(|(r, open)| format!("the {} restaurant is {}", r.name(), if *open { "open" } else { "closed" }))
        .collect();
    if !unseen.is_empty() {
        text.push_str(&format!(" On the way it saw that {}.", english_list(&unseen)));
    }
    text
}

/// What the agent perceives at one step, as shown to the model. `learned`
/// holds restaurant statuses seen at earlier steps.
pub fn render_observation(
    graph: &RoomGraph,
    obs: &Observation,
    earlier: &[RoomId],
    learned: &[(Restaurant, bool)],
) -> String {
    let room = obs.room.to_string();
    let visible = if obs.visible.is_empty() {
        "No restaurant is visible from here.".to_string()
    } else {
        let parts: Vec<String> = obs
            .visible
            .iter()
            .map(|(r, open)| {
                let status = if *open { "open" } else { "closed" };
                match graph.room_of(r) {
                    Some(at) if at == obs.room => {
                        format!("the {} restaurant in this room, which is {status}", r.name())
                    }
                    Some(at) => format!("the {} restaurant in {at}, which is {status}", r.name()),
                    None => format!("the {} restaurant, which is {status}", r.name()),
                }
            })
            .collect();
        format!("From here the agent can see {}.", english_list(&parts))
    };
    render(
        templates::OBSERVATION,
        &[
            ("history", &render_history(earlier, learned, obs)),
            ("room", &room),
            ("visible", &visible),
            ("reachable", &english_list(&rooms(&obs.reachable))),
        ],
    )
}

pub fn numbered<S: AsRef<str>>(items: &[S]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Probabilities are shown to the model with four decimals.
pub fn format_prob(p: f64) -> String {
    format!("{p:.4}")
}

/// The value the model reads for `p`.
pub fn displayed_prob(p: f64) -> f64 {
    format_prob(p).parse().expect("formatted float parses")
}

pub fn hypotheses_with_prior(hypotheses: &[Hypothesis], prior: &Distribution) -> String {
    hypotheses
        .iter()
        .zip(prior.probs())
        .enumerate()
        .map(|(i, (h, p))| format!("H{}. {} (prior: {})", i + 1, h.text, format_prob(*p)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn matrix_table(matrix: &LikelihoodMatrix) -> String {
    matrix
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let cells: Vec<String> = row.probs().iter().map(|&p| format_prob(p)).collect();
            format!("H{}: {}", i + 1, cells.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Model call parameters shared by every request of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    pub model_id: String,
    pub hypothesis_temperature: f64,
    pub likelihood_temperature: f64,
    pub posterior_temperature: f64,
    pub seed: Option<u64>,
    pub max_tokens: u32,
    pub max_retries: usize,
    /// Elicit the rows of a likelihood matrix concurrently.
    pub parallel: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            model_id: "default".into(),
            hypothesis_temperature: 0.7,
            likelihood_temperature: 0.0,
            posterior_temperature: 0.0,
            seed: None,
            max_tokens: 1024,
            max_retries: DEFAULT_MAX_RETRIES,
            parallel: true,
        }
    }
}

/// Which single-call configuration to prompt for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    #[serde(rename = "laip-single-cot")]
    SingleCot,
    GenericCot,
    ZeroShot,
}

impl BaselineKind {
    pub fn template(self) -> &'static str {
        match self {
            BaselineKind::SingleCot => templates::SINGLE_COT,
            BaselineKind::GenericCot => templates::GENERIC_COT,
            BaselineKind::ZeroShot => templates::ZERO_SHOT,
        }
    }

    pub fn purpose(self) -> &'static str {
        match self {
            BaselineKind::SingleCot => "single-cot",
            BaselineKind::GenericCot => "generic-cot",
            BaselineKind::ZeroShot => "zero-shot",
        }
    }
}

/// Builds every request the engine, baselines and open-ended loop send.
/// Building is separate from sending so scripts can be keyed on the exact
/// requests a run will make.
#[derive(Debug, Clone, PartialEq)]
pub struct Prompter {
    pub settings: EngineSettings,
    /// System message prepended to every request, if any.
    pub system: Option<String>,
}

impl Prompter {
    pub fn new(settings: EngineSettings, system: Option<String>) -> Self {
        Self { settings, system }
    }

    fn request(&self, user: String, temperature: f64) -> CompletionRequest {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &self.system {
            messages.push(Message::system(system.clone()));
        }
        messages.push(Message::user(user));
        CompletionRequest::new(self.settings.model_id.clone(), messages)
            .with_temperature(temperature)
            .with_seed(self.settings.seed)
            .with_max_tokens(self.settings.max_tokens)
    }

    pub fn hypotheses_request(&self, prompt: &str) -> CompletionRequest {
        self.request(prompt.to_string(), self.settings.hypothesis_temperature)
    }

    pub fn likelihood_request(&self, context: &str, hypothesis: &Hypothesis, actions: &[String]) -> CompletionRequest {
        let user = render(
            templates::LIKELIHOOD,
            &[
                ("context", context),
                ("hypothesis", &hypothesis.text),
                ("actions", &numbered(actions)),
            ],
        );
        self.request(user, self.settings.likelihood_temperature)
    }

    pub fn posterior_request(
        &self,
        context: &str,
        hypotheses: &[Hypothesis],
        prior: &Distribution,
        matrix: &LikelihoodMatrix,
        observed: &str,
    ) -> CompletionRequest {
        let actions = format!("Actions: {}", matrix.actions.join(" | "));
        let user = render(
            templates::POSTERIOR,
            &[
                ("context", context),
                ("hypotheses", &hypotheses_with_prior(hypotheses, prior)),
                ("actions", &actions),
                ("matrix", &matrix_table(matrix)),
                ("observed", observed),
            ],
        );
        self.request(user, self.settings.posterior_temperature)
    }

    pub fn baseline_request(
        &self,
        kind: BaselineKind,
        context: &str,
        hypotheses: &[Hypothesis],
        prior: &Distribution,
        actions: &[String],
        observed: &str,
    ) -> CompletionRequest {
        let user = render(
            kind.template(),
            &[
                ("context", context),
                ("hypotheses", &hypotheses_with_prior(hypotheses, prior)),
                ("actions", &numbered(actions)),
                ("observed", observed),
            ],
        );
        self.request(user, self.settings.posterior_temperature)
    }

    pub fn propose_actions_request(&self, context: &str, k: usize) -> CompletionRequest {
        let user = render(
            templates::PROPOSE_ACTIONS,
            &[("context", context), ("k", &k.to_string())],
        );
        self.request(user, self.settings.hypothesis_temperature)
    }
}

pub fn restaurant_hypotheses_prompt(n: usize) -> String {
    render(templates::HYPOTHESES, &[("n", &n.to_string())])
}

pub fn open_hypotheses_prompt(situation: &str, actor: &str, n: usize) -> String {
    render(
        templates::OPEN_HYPOTHESES,
        &[("situation", situation), ("actor", actor), ("n", &n.to_string())],
    )
}
