use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::compare::{compare_to_oracle, oracle_posteriors, ComparisonRow};
use super::{RunRecord, Task};
use crate::env::RoomGraph;
use crate::metrics::{hellinger, jsd, two_sample_t};
use crate::oracle::{NoiseParam, PreferenceOrdering};
use crate::provider::Usage;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no run records to report on")]
    Empty,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io(path: &Path, e: impl ToString) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    pub runs: usize,
    pub failed: usize,
    pub usage: Usage,
    pub calls: usize,
    pub comparison: Option<Vec<ComparisonRow>>,
    pub comparison_error: Option<String>,
    /// Largest componentwise gap to the optimal posterior over every
    /// compared trajectory.
    pub max_abs_diff: Option<f64>,
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".into())
}

struct Csv {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(dir: &Path, name: &str, header: &[&str]) -> Result<Self, ReportError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(|e| io(&path, e))?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), ReportError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| io(&self.path, e))
    }

    fn finish(self) -> Result<PathBuf, ReportError> {
        let bytes = self.writer.into_inner().map_err(|e| io(&self.path, e))?;
        fs::write(&self.path, bytes).map_err(|e| io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Writes the CSV tables and `summary.txt` into `dir`. Output depends only
/// on the records' contents, not their order or timing.
pub fn emit_report(records: &[RunRecord], dir: &Path) -> Result<ReportSummary, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut records: Vec<&RunRecord> = records.iter().collect();
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let mut files = Vec::new();

    let mut post = Csv::new(
        dir,
        "posteriors.csv",
        &["run_id", "mode", "trajectory", "repetition", "timestep", "hypothesis_id", "hypothesis", "prior", "posterior"],
    )?;
    let mut div = Csv::new(
        dir,
        "timestep_divergence.csv",
        &["run_id", "mode", "trajectory", "repetition", "from_timestep", "to_timestep", "jsd", "hellinger"],
    )?;
    for r in &records {
        let Some(hyps) = &r.hypotheses else { continue };
        for s in &r.steps {
            for (h, (p0, p1)) in hyps.iter().zip(s.prior.probs().iter().zip(s.posterior.probs())) {
                post.row([
                    r.run_id.clone(),
                    r.mode.to_string(),
                    r.trajectory.clone(),
                    r.repetition.to_string(),
                    s.timestep.to_string(),
                    h.id.to_string(),
                    h.text.clone(),
                    num(*p0),
                    num(*p1),
                ])?;
            }
        }
        for w in r.steps.windows(2) {
            let (a, b) = (&w[0].posterior, &w[1].posterior);
            div.row([
                r.run_id.clone(),
                r.mode.to_string(),
                r.trajectory.clone(),
                r.repetition.to_string(),
                w[0].timestep.to_string(),
                w[1].timestep.to_string(),
                jsd(a, b).map(num).unwrap_or_else(|_| "NA".into()),
                hellinger(a, b).map(num).unwrap_or_else(|_| "NA".into()),
            ])?;
        }
    }
    files.push(post.finish()?);
    files.push(div.finish()?);

    let restaurant: Vec<RunRecord> = records
        .iter()
        .filter(|r| r.task == Task::Restaurants)
        .map(|r| (*r).clone())
        .collect();
    let (comparison, comparison_error) = if restaurant.is_empty() {
        (None, Some("no restaurant runs".to_string()))
    } else {
        let graph = RoomGraph::food_court();
        let orderings = PreferenceOrdering::all(&graph);
        let eps = NoiseParam::new(restaurant[0].config.epsilon).unwrap_or_default();
        let mut ids: Vec<String> = restaurant.iter().map(|r| r.trajectory.clone()).collect();
        ids.sort();
        ids.dedup();
        match oracle_posteriors(&graph, &ids, &orderings, eps)
            .and_then(|oracle| compare_to_oracle(&restaurant, &oracle, &orderings))
        {
            Ok(rows) => (Some(rows), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };

    if let Some(rows) = &comparison {
        let mut corr = Csv::new(dir, "correlation.csv", &["mode", "runs", "trajectories", "pearson_r", "spearman_rho", "note"])?;
        let mut dist = Csv::new(
            dir,
            "distance.csv",
            &["mode", "trajectory", "runs", "jsd", "jsd_base", "hellinger", "max_abs_diff"],
        )?;
        for row in rows {
            corr.row([
                row.mode.clone(),
                row.runs.to_string(),
                row.trajectories.len().to_string(),
                opt(row.pearson_r),
                opt(row.spearman_rho),
                row.correlation_error.as_ref().map(ToString::to_string).unwrap_or_default(),
            ])?;
            for t in &row.trajectories {
                dist.row([
                    row.mode.clone(),
                    t.trajectory.clone(),
                    t.runs.to_string(),
                    num(t.jsd),
                    "2".to_string(),
                    num(t.hellinger),
                    num(t.max_abs_diff),
                ])?;
            }
        }
        files.push(corr.finish()?);
        files.push(dist.finish()?);

        let mut tt = Csv::new(
            dir,
            "ttest.csv",
            &["mode_a", "mode_b", "metric", "t", "dof", "cohens_d", "p_value"],
        )?;
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                let ja: Vec<f64> = a.trajectories.iter().map(|t| t.jsd).collect();
                let jb: Vec<f64> = b.trajectories.iter().map(|t| t.jsd).collect();
                if let Ok(t) = two_sample_t(&ja, &jb) {
                    tt.row([
                        a.mode.clone(),
                        b.mode.clone(),
                        "jsd".into(),
                        num(t.t),
                        t.dof.to_string(),
                        num(t.cohens_d),
                        num(t.p_value),
                    ])?;
                }
            }
        }
        files.push(tt.finish()?);
    }

    let max_abs_diff = comparison
        .as_ref()
        .map(|rows| rows.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max));
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    let usage: Usage = records.iter().map(|r| r.usage).sum();
    let calls: usize = records.iter().map(|r| r.calls).sum();

    let mut text = String::new();
    let _ = writeln!(text, "runs: {} (failed: {failed})", records.len());
    let _ = writeln!(
        text,
        "model calls: {calls}; tokens: {} prompt, {} completion",
        usage.prompt_tokens, usage.completion_tokens
    );
    match (&comparison, &comparison_error) {
        (Some(rows), _) => {
            let _ = writeln!(text, "\nagainst the optimal observer (JSD in bits):");
            for r in rows {
                let _ = writeln!(
                    text,
                    "  {}: {} runs over {} trajectories; pearson r = {}, spearman rho = {}, mean JSD = {:.6}, mean Hellinger = {:.6}, max |dposterior| = {:e}",
                    r.mode,
                    r.runs,
                    r.trajectories.len(),
                    r.pearson_r.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into()),
                    r.spearman_rho.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into()),
                    r.mean_jsd,
                    r.mean_hellinger,
                    r.max_abs_diff
                );
                if let Some(e) = &r.correlation_error {
                    let _ = writeln!(text, "    correlation undefined: {e}");
                }
            }
            let m = max_abs_diff.unwrap_or(0.0);
            let verdict = if m <= 1e-9 { "within" } else { "exceeds" };
            let _ = writeln!(text, "max |dposterior| vs optimal: {m:e} ({verdict} 1e-9)");
        }
        (None, Some(e)) => {
            let _ = writeln!(text, "\nno oracle comparison: {e}");
        }
        (None, None) => {}
    }
    if failed > 0 {
        let _ = writeln!(text, "\nfailed runs:");
        for r in records.iter().filter(|r| !r.is_ok()) {
            let _ = writeln!(text, "  {}: {}", r.run_id, r.error.as_deref().unwrap_or(""));
        }
    }
    let summary_path = dir.join("summary.txt");
    fs::write(&summary_path, &text).map_err(|e| io(&summary_path, e))?;
    files.push(summary_path);

    Ok(ReportSummary {
        files,
        runs: records.len(),
        failed,
        usage,
        calls,
        comparison,
        comparison_error,
        max_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{run_experiment, ExperimentConfig};

    #[test]
    fn empty_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(&[], dir.path()), Err(ReportError::Empty)));
    }

    #[test]
    fn oracle_batch_report() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::from_toml("mode = \"laip-full\"\ntrajectories = [\"study1-closed\", \"t3\", \"t4\"]").unwrap();
        let batch = run_experiment(&c).unwrap();
        let s = emit_report(&batch.records, dir.path()).unwrap();
        assert!(s.max_abs_diff.unwrap() <= 1e-9);
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("(within 1e-9)"), "{summary}");
        let div = fs::read_to_string(dir.path().join("timestep_divergence.csv")).unwrap();
        let study1_rows = div.lines().filter(|l| l.contains("study1-closed")).count();
        assert_eq!(study1_rows, 5 - 1);
        let rows = s.comparison.unwrap();
        let (r, rho) = rows[0].correlations().unwrap();
        assert!((r - 1.0).abs() < 1e-9 && (rho - 1.0).abs() < 1e-9);
    }
}
