//! Batch execution of experiment configs, run persistence, oracle
//! comparison and report tables.

pub mod compare;
pub mod config;
pub mod report;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::run_baseline;
use crate::distribution::Distribution;
use crate::engine::prompts::{restaurant_hypotheses_prompt, restaurants_system, Prompter};
use crate::engine::{
    oracle_script, restaurant_steps, Engine, EngineError, HypothesisSet, Mode, ScriptOptions, StepRecord,
    TrajectoryOutcome,
};
use crate::env::{load_trajectory, RoomGraph};
use crate::oracle::{NoiseParam, PreferenceOrdering};
use crate::open_ended::{run_open_ended, scenario_prompter, simulate_actor, OpenEndedOptions, Scenario};
use crate::provider::{
    CacheRecord, CachingBackend, ChatBackend, Embedder, HttpBackend, HttpEmbedder, MockEmbedder,
    ResponseCache, ScriptedBackend, Transcript, Usage,
};

pub use compare::{compare_to_oracle, oracle_posteriors, ComparisonRow, CompareError};
pub use config::{
    AlignmentMapping, BackendKind, ConfigError, EmbeddingKind, ExperimentConfig, HypothesisSource, Task,
};
pub use report::{emit_report, ReportError, ReportSummary};

/// One (configuration, trajectory, repetition) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub mode: Mode,
    pub task: Task,
    pub trajectory: String,
    pub repetition: usize,
    pub seed: u64,
    pub hypotheses: Option<HypothesisSet>,
    pub prior: Option<Distribution>,
    /// Persisted separately, one JSON line per step.
    #[serde(skip)]
    pub steps: Vec<StepRecord>,
    pub final_posterior: Option<Distribution>,
    pub error: Option<String>,
    /// Calls made before the first step, e.g. hypothesis generation.
    pub setup_transcripts: Vec<Transcript>,
    /// Calls of the step that failed, if any.
    pub failed_transcripts: Vec<Transcript>,
    /// Choices the open-ended observer saw.
    #[serde(default)]
    pub observations: Vec<String>,
    pub usage: Usage,
    pub calls: usize,
    pub wall_clock_ms: u64,
}

impl RunRecord {
    pub fn transcripts(&self) -> impl Iterator<Item = &Transcript> {
        self.setup_transcripts
            .iter()
            .chain(self.steps.iter().flat_map(|s| &s.raw))
            .chain(&self.failed_transcripts)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

pub fn run_id(config: &ExperimentConfig, mode: Mode, trajectory: &str, repetition: usize) -> String {
    let traj = Path::new(trajectory)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(trajectory);
    format!("{}-{}-{}-r{:02}", config.name, mode, traj, repetition)
}

enum Backends {
    /// Built per run from the optimal observer.
    Oracle { cache: Option<Arc<ResponseCache>> },
    Shared(Arc<dyn ChatBackend>),
}

fn open_cache(config: &ExperimentConfig) -> Result<Option<Arc<ResponseCache>>, ConfigError> {
    config
        .backend
        .cache
        .as_ref()
        .map(|p| {
            ResponseCache::open(p)
                .map(Arc::new)
                .map_err(|e| ConfigError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })
        })
        .transpose()
}

fn load_script(path: &Path) -> Result<Vec<CacheRecord>, ConfigError> {
    let io = |e: std::io::Error| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| ConfigError::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

fn build_backends(config: &ExperimentConfig) -> Result<Backends, ConfigError> {
    if config.backend.kind == BackendKind::Replay {
        let path = config.backend.cache.as_ref().expect("validated");
        if !path.exists() {
            return Err(ConfigError::Io {
                path: path.display().to_string(),
                message: "cache file does not exist".into(),
            });
        }
    }
    let cache = open_cache(config)?;
    let wrap = |inner: Arc<dyn ChatBackend>| -> Arc<dyn ChatBackend> {
        match &cache {
            Some(c) => Arc::new(CachingBackend::record(inner, c.clone())),
            None => inner,
        }
    };
    Ok(match config.backend.kind {
        BackendKind::Oracle => Backends::Oracle { cache },
        BackendKind::Replay => Backends::Shared(Arc::new(CachingBackend::replay(cache.expect("validated")))),
        BackendKind::Http => {
            let url = config.backend.base_url.clone().expect("validated");
            Backends::Shared(wrap(Arc::new(HttpBackend::from_env(url, &config.backend.api_key_env))))
        }
        BackendKind::Scripted => {
            let mut s = ScriptedBackend::new("scripted");
            if let Some(path) = &config.backend.script {
                for r in load_script(path)? {
                    s.insert_digest(r.digest, r.response_text);
                }
            }
            if let Some(f) = &config.backend.fallback {
                s = s.with_fallback(f.clone());
            }
            Backends::Shared(wrap(Arc::new(s)))
        }
    })
}

fn build_embedder(config: &ExperimentConfig) -> Result<Arc<dyn Embedder>, ConfigError> {
    Ok(match config.embedding.kind {
        EmbeddingKind::Mock => Arc::new(MockEmbedder::new(config.embedding.seed)),
        EmbeddingKind::Http => {
            let url = config.backend.base_url.clone().ok_or_else(|| {
                ConfigError::Invalid("http embeddings need backend.base_url".into())
            })?;
            Arc::new(HttpEmbedder::new(
                HttpBackend::from_env(url, &config.backend.api_key_env),
                config.embedding.model.clone(),
            ))
        }
    })
}

fn load_scenario(config: &ExperimentConfig) -> Result<Scenario, ConfigError> {
    match config.scenario.as_deref() {
        None | Some("alice") => Ok(Scenario::alice()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.into(),
                message: e.to_string(),
            })?;
            Scenario::from_toml(&text).map_err(|e| ConfigError::Invalid(e.to_string()))
        }
    }
}

/// Everything shared by the runs of one batch.
struct Prepared {
    config: ExperimentConfig,
    graph: RoomGraph,
    backends: Backends,
    embedder: Arc<dyn Embedder>,
    scenario: Option<Scenario>,
    mapping: Option<AlignmentMapping>,
    file_hypotheses: Option<(HypothesisSet, Option<Distribution>)>,
}

fn file_hypotheses(
    graph: &RoomGraph,
    path: &Path,
) -> Result<(HypothesisSet, Option<Distribution>), ConfigError> {
    let file = config::HypothesisFile::load(path)?;
    let mut items = Vec::new();
    for h in &file.hypotheses {
        let ordering = h
            .ordering
            .as_deref()
            .map(|o| PreferenceOrdering::parse(graph, o))
            .transpose()
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        items.push((h.text.clone(), ordering));
    }
    let set = HypothesisSet::new(items).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let prior = if file.hypotheses.iter().all(|h| h.prior.is_some()) {
        let w = file.hypotheses.iter().map(|h| h.prior.unwrap_or(0.0)).collect();
        Some(Distribution::from_weights(w).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?)
    } else {
        None
    };
    Ok((set, prior))
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared, ConfigError> {
    config.validate()?;
    let graph = RoomGraph::food_court();
    let backends = build_backends(config)?;
    let embedder = build_embedder(config)?;
    let mapping = config
        .hypotheses
        .mapping
        .as_ref()
        .map(|p| AlignmentMapping::load(&graph, p))
        .transpose()?;
    let file_hypotheses = match config.hypotheses.source {
        HypothesisSource::File => Some(file_hypotheses(&graph, config.hypotheses.path.as_ref().expect("validated"))?),
        _ => None,
    };
    let scenario = match config.task {
        Task::Restaurants => None,
        Task::OpenEnded => Some(load_scenario(config)?),
    };
    Ok(Prepared {
        config: config.clone(),
        graph,
        backends,
        embedder,
        scenario,
        mapping,
        file_hypotheses,
    })
}

fn apply_mapping(set: HypothesisSet, mapping: Option<&AlignmentMapping>) -> HypothesisSet {
    let Some(mapping) = mapping else { return set };
    let items = set
        .iter()
        .map(|h| {
            let ordering = match mapping.lookup(&h.text) {
                Some(o) => o.cloned(),
                None => h.ordering.clone(),
            };
            (h.text.clone(), ordering)
        })
        .collect();
    HypothesisSet::new(items).expect("texts were already valid")
}

struct RunPlan {
    mode: Mode,
    trajectory: String,
    repetition: usize,
    seed: u64,
}

impl Prepared {
    fn prompter(&self, seed: u64) -> Prompter {
        let settings = self.config.engine_settings(seed);
        match &self.scenario {
            Some(s) => scenario_prompter(s, settings),
            None => Prompter::new(settings, Some(restaurants_system(&self.graph))),
        }
    }

    fn hypotheses(
        &self,
        engine: &Engine<'_>,
        log: &mut Vec<Transcript>,
    ) -> Result<(HypothesisSet, Distribution), EngineError> {
        let uniform = self.config.hypotheses.uniform_prior;
        let (set, prior) = match self.config.hypotheses.source {
            HypothesisSource::Orderings => {
                let set = HypothesisSet::orderings(&self.graph);
                let n = set.len();
                (set, Distribution::uniform(n)?)
            }
            HypothesisSource::Generated => {
                let n = self.config.hypotheses.n;
                let prompt = match &self.scenario {
                    Some(s) => s.hypotheses_prompt(n),
                    None => restaurant_hypotheses_prompt(n),
                };
                engine.generate_prior(&prompt, n, uniform, log)?
            }
            HypothesisSource::File => {
                let (set, prior) = self.file_hypotheses.clone().expect("loaded in prepare");
                let prior = match prior {
                    Some(p) if !uniform => p,
                    _ => Distribution::uniform(set.len())?,
                };
                (set, prior)
            }
            HypothesisSource::Scenario => {
                let set = self.scenario.as_ref().expect("open-ended").hypothesis_set()?;
                let n = set.len();
                (set, Distribution::uniform(n)?)
            }
        };
        Ok((apply_mapping(set, self.mapping.as_ref()), prior))
    }

    fn backend_for(
        &self,
        prompter: &Prompter,
        plan: &RunPlan,
        hypotheses: &HypothesisSet,
        prior: &Distribution,
    ) -> Result<Arc<dyn ChatBackend>, EngineError> {
        match &self.backends {
            Backends::Shared(b) => Ok(b.clone()),
            Backends::Oracle { cache } => {
                let traj = load_trajectory(&plan.trajectory)?;
                let opts = ScriptOptions {
                    eps: NoiseParam::new(self.config.epsilon)?,
                    mode: plan.mode,
                };
                let script: Arc<dyn ChatBackend> =
                    Arc::new(oracle_script(prompter, &self.graph, &traj, hypotheses, prior, &opts)?);
                Ok(match cache {
                    Some(c) => Arc::new(CachingBackend::record(script, c.clone())),
                    None => script,
                })
            }
        }
    }

    fn execute(&self, plan: &RunPlan, scenario: Option<&Scenario>) -> RunRecord {
        let start = Instant::now();
        let prompter = self.prompter(plan.seed);
        let mut record = RunRecord {
            run_id: run_id(&self.config, plan.mode, &plan.trajectory, plan.repetition),
            config: self.config.clone(),
            mode: plan.mode,
            task: self.config.task,
            trajectory: plan.trajectory.clone(),
            repetition: plan.repetition,
            seed: plan.seed,
            hypotheses: None,
            prior: None,
            steps: Vec::new(),
            final_posterior: None,
            error: None,
            setup_transcripts: Vec::new(),
            failed_transcripts: Vec::new(),
            observations: scenario
                .map(|s| s.scenes.iter().filter_map(|sc| sc.observed.clone()).collect())
                .unwrap_or_default(),
            usage: Usage::default(),
            calls: 0,
            wall_clock_ms: 0,
        };
        let outcome = self.execute_inner(plan, scenario, &prompter, &mut record);
        match outcome {
            Ok(out) => {
                record.final_posterior = out.final_posterior().cloned();
                if let Some(f) = out.failure {
                    record.error = Some(format!("step {}: {}", f.timestep, f.error));
                    record.failed_transcripts = f.transcripts;
                }
                record.steps = out.steps;
            }
            Err(e) => record.error = Some(format!("setup: {e}")),
        }
        record.usage = record.transcripts().map(|t| t.usage).sum();
        record.calls = record.transcripts().count();
        record.wall_clock_ms = start.elapsed().as_millis() as u64;
        record
    }

    fn execute_inner(
        &self,
        plan: &RunPlan,
        scenario: Option<&Scenario>,
        prompter: &Prompter,
        record: &mut RunRecord,
    ) -> Result<TrajectoryOutcome, EngineError> {
        // hypotheses come from the shared backend; the oracle needs none
        let (hypotheses, prior) = {
            let setup_backend: Arc<dyn ChatBackend> = match &self.backends {
                Backends::Shared(b) => b.clone(),
                Backends::Oracle { .. } => Arc::new(ScriptedBackend::new("oracle-setup")),
            };
            let engine = Engine::new(setup_backend.as_ref(), prompter.clone());
            let result = self.hypotheses(&engine, &mut record.setup_transcripts);
            result?
        };
        record.hypotheses = Some(hypotheses.clone());
        record.prior = Some(prior.clone());
        let backend = self.backend_for(prompter, plan, &hypotheses, &prior)?;
        let engine = Engine::new(backend.as_ref(), prompter.clone());
        Ok(match scenario {
            Some(s) => {
                let opts = OpenEndedOptions {
                    mode: plan.mode,
                    proposals: self.config.proposals,
                    tau: self.config.tau,
                };
                run_open_ended(&engine, self.embedder.as_ref(), s, &hypotheses, &prior, &opts)
            }
            None => {
                let traj = load_trajectory(&plan.trajectory)?;
                let inputs = restaurant_steps(&self.graph, &traj)?;
                match (plan.mode.update_mode(), plan.mode.baseline()) {
                    (Some(update), _) => engine.run_trajectory(&inputs, &hypotheses, &prior, update),
                    (None, Some(kind)) => run_baseline(&engine, kind, &inputs, &hypotheses, &prior),
                    (None, None) => unreachable!("every mode is multi-call or single-call"),
                }
            }
        })
    }
}

/// Result of a batch: one record per (mode, trajectory, repetition), in
/// that order, plus the scenario as observed when choices were simulated.
#[derive(Debug, Clone)]
pub struct Batch {
    pub records: Vec<RunRecord>,
    pub simulated_scenario: Option<Scenario>,
    pub actor_transcripts: Vec<Transcript>,
}

impl Batch {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Runs every (mode, trajectory, repetition) of `config`, up to
/// `config.concurrency` at a time. A failed run is recorded with its error
/// and the batch continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Batch, ConfigError> {
    let prepared = prepare(config)?;
    let mut scenario = prepared.scenario.clone();
    let mut actor_transcripts = Vec::new();
    let mut simulated = false;
    if let Some(s) = scenario.as_mut() {
        if s.scenes.iter().any(|sc| sc.observed.is_none()) {
            let Backends::Shared(actor) = &prepared.backends else {
                return Err(ConfigError::Invalid("scene choices need a model backend".into()));
            };
            let settings = config.engine_settings(config.seeds()[0]);
            actor_transcripts = simulate_actor(s, actor.as_ref(), &settings)
                .map_err(|e| ConfigError::Invalid(format!("simulating the actor: {e}")))?;
            simulated = true;
        }
    }

    let seeds = config.seeds();
    let plans: Vec<RunPlan> = config
        .modes()
        .into_iter()
        .flat_map(|mode| {
            let seeds = &seeds;
            config.trajectory_ids().into_iter().flat_map(move |t| {
                seeds.iter().enumerate().map(move |(repetition, &seed)| RunPlan {
                    mode,
                    trajectory: t.clone(),
                    repetition,
                    seed,
                })
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let records = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| prepared.execute(plan, scenario.as_ref()))
            .collect()
    });
    Ok(Batch {
        records,
        simulated_scenario: if simulated { scenario } else { None },
        actor_transcripts,
    })
}

pub fn runs_dir(out: &Path) -> PathBuf {
    out.join("runs")
}

fn io(path: &Path, e: impl ToString) -> ConfigError {
    ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `runs/<run_id>/record.json` and `runs/<run_id>/steps.jsonl`
/// under `out`.
pub fn persist_run(out: &Path, record: &RunRecord) -> Result<PathBuf, ConfigError> {
    let dir = runs_dir(out).join(&record.run_id);
    fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    let steps_path = dir.join("steps.jsonl");
    let mut w = BufWriter::new(File::create(&steps_path).map_err(|e| io(&steps_path, e))?);
    for step in &record.steps {
        serde_json::to_writer(&mut w, step).map_err(|e| io(&steps_path, e))?;
        w.write_all(b"\n").map_err(|e| io(&steps_path, e))?;
    }
    w.flush().map_err(|e| io(&steps_path, e))?;
    let record_path = dir.join("record.json");
    let text = serde_json::to_string_pretty(record).map_err(|e| io(&record_path, e))?;
    fs::write(&record_path, text).map_err(|e| io(&record_path, e))?;
    Ok(dir)
}

pub fn load_run(dir: &Path) -> Result<RunRecord, ConfigError> {
    let record_path = dir.join("record.json");
    let text = fs::read_to_string(&record_path).map_err(|e| io(&record_path, e))?;
    let mut record: RunRecord =
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", record_path.display())))?;
    let steps_path = dir.join("steps.jsonl");
    let reader = BufReader::new(File::open(&steps_path).map_err(|e| io(&steps_path, e))?);
    for line in reader.lines() {
        let line = line.map_err(|e| io(&steps_path, e))?;
        if !line.trim().is_empty() {
            record.steps.push(
                serde_json::from_str(&line)
                    .map_err(|e| ConfigError::Parse(format!("{}: {e}", steps_path.display())))?,
            );
        }
    }
    Ok(record)
}

/// Loads every run under `out/runs`, sorted by run id.
pub fn load_runs(out: &Path) -> Result<Vec<RunRecord>, ConfigError> {
    let dir = runs_dir(out);
    let mut records = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| io(&dir, e))? {
        let path = entry.map_err(|e| io(&dir, e))?.path();
        if path.join("record.json").exists() {
            records.push(load_run(&path)?);
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(records)
}
