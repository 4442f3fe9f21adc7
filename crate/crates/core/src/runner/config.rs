use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineSettings, Mode};
use crate::env::{trajectory_ids, RoomGraph};
use crate::oracle::{NoiseParam, PreferenceOrdering};
use crate::provider::DEFAULT_MAX_RETRIES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[default]
    Restaurants,
    OpenEnded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisSource {
    /// Every strict preference ordering.
    #[default]
    Orderings,
    /// Elicited from the model at the start of each run.
    Generated,
    /// Listed in a TOML file.
    File,
    /// The scenario's hypothesis table.
    Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisConfig {
    pub source: HypothesisSource,
    pub n: usize,
    pub uniform_prior: bool,
    pub path: Option<PathBuf>,
    /// Hypothesis text to ordering, for comparing generated hypotheses with
    /// the optimal observer.
    pub mapping: Option<PathBuf>,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self {
            source: HypothesisSource::Orderings,
            n: 20,
            uniform_prior: true,
            path: None,
            mapping: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Scripted with the optimal observer's numbers.
    #[default]
    Oracle,
    /// Canned replies from a JSONL script and/or a fallback text.
    Scripted,
    Http,
    /// Cache only; a miss fails the run.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model: String,
    pub base_url: Option<String>,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub cache: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub fallback: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Oracle,
            model: "default".into(),
            base_url: None,
            api_key_env: "OPENAI_API_KEY".into(),
            cache: None,
            script: None,
            fallback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Temperatures {
    pub hypotheses: f64,
    pub likelihood: f64,
    pub posterior: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        let s = EngineSettings::default();
        Self {
            hypotheses: s.hypothesis_temperature,
            likelihood: s.likelihood_temperature,
            posterior: s.posterior_temperature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub model: String,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::Mock,
            model: "text-embedding-3-small".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Option<Mode>,
    /// Several configurations in one batch; combined with `mode`.
    pub modes: Vec<Mode>,
    pub task: Task,
    /// Empty means t1 to t10.
    pub trajectories: Vec<String>,
    /// `alice` or a scenario file.
    pub scenario: Option<String>,
    pub repetitions: usize,
    /// One per repetition; empty means `0..repetitions`.
    pub seeds: Vec<u64>,
    pub concurrency: usize,
    pub epsilon: f64,
    pub tau: f64,
    pub proposals: usize,
    pub max_retries: usize,
    pub max_tokens: u32,
    pub hypotheses: HypothesisConfig,
    pub backend: BackendConfig,
    pub temperatures: Temperatures,
    pub embedding: EmbeddingConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            mode: None,
            modes: Vec::new(),
            task: Task::Restaurants,
            trajectories: Vec::new(),
            scenario: None,
            repetitions: 1,
            seeds: Vec::new(),
            concurrency: 4,
            epsilon: NoiseParam::default().value(),
            tau: crate::open_ended::DEFAULT_TAU,
            proposals: crate::open_ended::DEFAULT_PROPOSALS,
            max_retries: DEFAULT_MAX_RETRIES,
            max_tokens: 1024,
            hypotheses: HypothesisConfig::default(),
            backend: BackendConfig::default(),
            temperatures: Temperatures::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

fn io_err(path: &Path, e: impl ToString) -> ConfigError {
    ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut config: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.hypotheses.path);
        resolve(&mut config.hypotheses.mapping);
        resolve(&mut config.backend.cache);
        resolve(&mut config.backend.script);
        if let Some(s) = config.scenario.as_mut().filter(|s| s.ends_with(".toml") && Path::new(s).is_relative()) {
            *s = base.join(&*s).display().to_string();
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Configurations to run, `mode` first, without duplicates.
    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::new();
        for m in self.mode.iter().chain(&self.modes) {
            if !out.contains(m) {
                out.push(*m);
            }
        }
        out
    }

    pub fn trajectory_ids(&self) -> Vec<String> {
        match self.task {
            Task::OpenEnded => vec![self.scenario.clone().unwrap_or_else(|| "alice".into())],
            Task::Restaurants if self.trajectories.is_empty() => (1..=10).map(|i| format!("t{i}")).collect(),
            Task::Restaurants => self.trajectories.clone(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repetitions as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn engine_settings(&self, seed: u64) -> EngineSettings {
        EngineSettings {
            model_id: self.backend.model.clone(),
            hypothesis_temperature: self.temperatures.hypotheses,
            likelihood_temperature: self.temperatures.likelihood,
            posterior_temperature: self.temperatures.posterior,
            seed: Some(seed),
            max_tokens: self.max_tokens,
            max_retries: self.max_retries,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.modes().is_empty() {
            return invalid("no mode given".into());
        }
        if self.repetitions == 0 {
            return invalid("repetitions must be at least 1".into());
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repetitions {
            return invalid(format!(
                "{} seeds for {} repetitions",
                self.seeds.len(),
                self.repetitions
            ));
        }
        if self.concurrency == 0 {
            return invalid("concurrency must be at least 1".into());
        }
        if NoiseParam::new(self.epsilon).is_err() {
            return invalid(format!("epsilon {} outside [0, 1)", self.epsilon));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return invalid(format!("tau must be positive, got {}", self.tau));
        }
        if self.proposals == 0 {
            return invalid("proposals must be at least 1".into());
        }
        for t in [self.temperatures.hypotheses, self.temperatures.likelihood, self.temperatures.posterior] {
            if !(t >= 0.0 && t.is_finite()) {
                return invalid(format!("temperature {t}"));
            }
        }
        match self.task {
            Task::Restaurants => {
                let known = trajectory_ids();
                if let Some(t) = self.trajectory_ids().iter().find(|t| !known.contains(t)) {
                    return invalid(format!("unknown trajectory {t:?}"));
                }
                if self.hypotheses.source == HypothesisSource::Scenario {
                    return invalid("scenario hypotheses need the open-ended task".into());
                }
            }
            Task::OpenEnded => {
                if !self.trajectories.is_empty() {
                    return invalid("open-ended runs take a scenario, not trajectories".into());
                }
                if self.hypotheses.source == HypothesisSource::Orderings {
                    return invalid("orderings only describe the restaurant task".into());
                }
                if self.backend.kind == BackendKind::Oracle {
                    return invalid("the oracle backend only serves the restaurant task".into());
                }
            }
        }
        if self.backend.kind == BackendKind::Oracle && self.hypotheses.source != HypothesisSource::Orderings {
            return invalid("the oracle backend needs ordering hypotheses".into());
        }
        if self.hypotheses.source == HypothesisSource::File && self.hypotheses.path.is_none() {
            return invalid("hypotheses.path is required for file hypotheses".into());
        }
        if self.hypotheses.source == HypothesisSource::Generated && self.hypotheses.n == 0 {
            return invalid("hypotheses.n must be at least 1".into());
        }
        if self.backend.kind == BackendKind::Http && self.backend.base_url.is_none() {
            return invalid("backend.base_url is required for http".into());
        }
        if self.backend.kind == BackendKind::Replay && self.backend.cache.is_none() {
            return invalid("backend.cache is required for replay".into());
        }
        if self.backend.kind == BackendKind::Scripted
            && self.backend.script.is_none()
            && self.backend.fallback.is_none()
        {
            return invalid("scripted backend needs a script or a fallback".into());
        }
        Ok(())
    }
}

/// Hypotheses listed in a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFile {
    pub hypotheses: Vec<HypothesisEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub text: String,
    /// e.g. `"Japanese > Chinese > Mexican"`.
    #[serde(default)]
    pub ordering: Option<String>,
    #[serde(default)]
    pub prior: Option<f64>,
}

impl HypothesisFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let file: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        if file.hypotheses.is_empty() {
            return Err(ConfigError::Invalid(format!("{}: no hypotheses", path.display())));
        }
        Ok(file)
    }
}

/// Hypothesis text to ordering; `"unmapped"` excludes a hypothesis from
/// oracle comparison.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentMapping {
    entries: BTreeMap<String, Option<PreferenceOrdering>>,
}

pub const UNMAPPED: &str = "unmapped";

impl AlignmentMapping {
    pub fn from_toml(graph: &RoomGraph, text: &str) -> Result<Self, ConfigError> {
        #[derive(Deserialize)]
        struct File {
            mapping: BTreeMap<String, String>,
        }
        let file: File = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (text, target) in file.mapping {
            let ordering = if target.trim() == UNMAPPED {
                None
            } else {
                Some(
                    PreferenceOrdering::parse(graph, &target)
                        .map_err(|e| ConfigError::Invalid(format!("mapping for {text:?}: {e}")))?,
                )
            };
            entries.insert(text.trim().to_string(), ordering);
        }
        Ok(Self { entries })
    }

    pub fn load(graph: &RoomGraph, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(graph, &text)
    }

    /// `None` when the text is not listed, `Some(None)` when it is listed
    /// as unmapped.
    pub fn lookup(&self, text: &str) -> Option<Option<&PreferenceOrdering>> {
        self.entries.get(text.trim()).map(Option::as_ref)
    }
}
