use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use laip::env::{load_trajectory, trajectory_ids, RoomGraph};
use laip::oracle::{NoiseParam, PreferenceOrdering};
use laip::runner::{
    compare_to_oracle, emit_report, load_runs, oracle_posteriors, persist_run, run_experiment, BackendKind,
    ConfigError, ExperimentConfig, RunRecord, Task,
};

/// Inverse planning over preference hypotheses with model-elicited likelihoods.
#[derive(Parser)]
#[command(name = "laip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration in a config file and write runs plus a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Record every model response to this JSONL cache.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-run a config purely from a response cache.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
    },
    /// Compare persisted restaurant runs against the optimal observer.
    Compare {
        /// Output directory of an earlier `run`.
        #[arg(long)]
        runs: PathBuf,
        /// Also write the comparison as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the CSV tables and summary for persisted runs.
    Report {
        #[arg(long)]
        runs: PathBuf,
        /// Defaults to `<runs>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in trajectories.
    ListTrajectories,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

const OK: u8 = 0;
const PARTIAL: u8 = 1;
const CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, cache, out } => run(&config, cache, None, &out),
        Command::Replay { config, cache, out } => run(&config, Some(cache), Some(BackendKind::Replay), &out),
        Command::Compare { runs, out } => compare(&runs, out.as_deref()),
        Command::Report { runs, out } => report(&runs, out),
        Command::ListTrajectories => list_trajectories(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(PARTIAL)
        }
    }
}

fn run(config_path: &Path, cache: Option<PathBuf>, kind: Option<BackendKind>, out: &Path) -> Result<u8, Failure> {
    let config_err = |e: ConfigError| Failure::Config(e.to_string());
    let mut config = ExperimentConfig::load(config_path).map_err(config_err)?;
    if let Some(c) = cache {
        config.backend.cache = Some(c);
    }
    if let Some(k) = kind {
        config.backend.kind = k;
    }
    config.validate().map_err(config_err)?;

    let batch = run_experiment(&config).map_err(config_err)?;
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    fs::write(out.join("config.toml"), config.to_toml())
        .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    for r in &batch.records {
        persist_run(out, r)?;
    }
    if let Some(s) = &batch.simulated_scenario {
        let path = out.join("scenario.json");
        let text = serde_json::to_string_pretty(s).map_err(|e| Failure::Runtime(e.to_string()))?;
        fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    if !batch.actor_transcripts.is_empty() {
        let path = out.join("actor_transcripts.jsonl");
        let mut text = String::new();
        for t in &batch.actor_transcripts {
            text.push_str(&serde_json::to_string(t).map_err(|e| Failure::Runtime(e.to_string()))?);
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }

    let summary = emit_report(&batch.records, &out.join("report")).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!(
        "{} runs, {} failed; {} model calls; results in {}",
        summary.runs,
        summary.failed,
        summary.calls,
        out.display()
    );
    for r in batch.records.iter().filter(|r| !r.is_ok()) {
        eprintln!("{}: {}", r.run_id, r.error.as_deref().unwrap_or(""));
    }
    Ok(if batch.failures() > 0 { PARTIAL } else { OK })
}

fn load(runs: &Path) -> Result<Vec<RunRecord>, Failure> {
    let records = load_runs(runs)?;
    if records.is_empty() {
        return Err(Failure::Runtime(format!("no runs under {}", runs.display())));
    }
    Ok(records)
}

fn compare(runs: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let all = load(runs)?;
    let failed = all.iter().filter(|r| !r.is_ok()).count();
    let records: Vec<RunRecord> = all.into_iter().filter(|r| r.task == Task::Restaurants).collect();
    if records.is_empty() {
        return Err(Failure::Runtime("no restaurant runs to compare".into()));
    }
    let graph = RoomGraph::food_court();
    let orderings = PreferenceOrdering::all(&graph);
    let eps = NoiseParam::new(records[0].config.epsilon).map_err(|e| Failure::Config(e.to_string()))?;
    let mut ids: Vec<String> = records.iter().map(|r| r.trajectory.clone()).collect();
    ids.sort();
    ids.dedup();
    let rows = oracle_posteriors(&graph, &ids, &orderings, eps)
        .and_then(|oracle| compare_to_oracle(&records, &oracle, &orderings))
        .map_err(|e| Failure::Runtime(e.to_string()))?;

    println!("{:<18} {:>5} {:>10} {:>10} {:>10} {:>10}", "mode", "runs", "pearson", "spearman", "jsd", "hellinger");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into());
    for r in &rows {
        println!(
            "{:<18} {:>5} {:>10} {:>10} {:>10.4} {:>10.4}",
            r.mode,
            r.runs,
            fmt(r.pearson_r),
            fmt(r.spearman_rho),
            r.mean_jsd,
            r.mean_hellinger
        );
    }
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(&rows).map_err(|e| Failure::Runtime(e.to_string()))?;
        fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(if failed > 0 { PARTIAL } else { OK })
}

fn report(runs: &Path, out: Option<PathBuf>) -> Result<u8, Failure> {
    let records = load(runs)?;
    let dir = out.unwrap_or_else(|| runs.join("report"));
    let summary = emit_report(&records, &dir).map_err(|e| Failure::Runtime(e.to_string()))?;
    for f in &summary.files {
        println!("{}", f.display());
    }
    Ok(if summary.failed > 0 { PARTIAL } else { OK })
}

fn list_trajectories() -> Result<u8, Failure> {
    for id in trajectory_ids() {
        let t = load_trajectory(&id).map_err(|e| Failure::Runtime(e.to_string()))?;
        let note = if t.reconstructed { " (path completed)" } else { "" };
        println!("{:<14} {:>2} actions  {}{note}", t.id, t.actions.len(), t.cells.join(" "));
    }
    Ok(OK)
}
