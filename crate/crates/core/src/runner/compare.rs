use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RunRecord, Task};
use crate::distribution::Distribution;
use crate::engine::HypothesisSet;
use crate::env::{load_trajectory, trajectory_ids, RoomGraph};
use crate::metrics::{hellinger, jsd, pearson_r, spearman_rho, LogBase, MetricError};
use crate::oracle::{optimal_posterior, NoiseParam, OracleError, PreferenceOrdering};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("cannot align hypotheses with orderings: {0}")]
    Alignment(String),
    #[error("no completed restaurant runs to compare")]
    NoRecords,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Optimal posteriors with a uniform prior over `orderings`.
pub fn oracle_posteriors(
    graph: &RoomGraph,
    ids: &[String],
    orderings: &[PreferenceOrdering],
    eps: NoiseParam,
) -> Result<BTreeMap<String, Distribution>, CompareError> {
    let prior = Distribution::uniform(orderings.len()).map_err(OracleError::from)?;
    ids.iter()
        .map(|id| {
            let traj = load_trajectory(id).map_err(OracleError::from)?;
            Ok((id.clone(), optimal_posterior(graph, &traj, orderings, &prior, eps)?))
        })
        .collect()
}

/// Folds a posterior over hypotheses onto `orderings`. Mass on
/// hypotheses without an ordering is dropped and the rest renormalized.
pub fn align_posterior(
    hypotheses: &HypothesisSet,
    posterior: &Distribution,
    orderings: &[PreferenceOrdering],
) -> Result<Distribution, CompareError> {
    if hypotheses.len() != posterior.len() {
        return Err(CompareError::Alignment(format!(
            "{} hypotheses for {} posterior entries",
            hypotheses.len(),
            posterior.len()
        )));
    }
    let mut w = vec![0.0; orderings.len()];
    let mut mapped = 0;
    for (h, p) in hypotheses.iter().zip(posterior.probs()) {
        let Some(o) = &h.ordering else { continue };
        let i = orderings
            .iter()
            .position(|x| x == o)
            .ok_or_else(|| CompareError::Alignment(format!("unknown ordering {o}")))?;
        w[i] += p;
        mapped += 1;
    }
    if mapped == 0 {
        return Err(CompareError::Alignment(
            "no hypothesis is mapped to an ordering; supply hypotheses.mapping".into(),
        ));
    }
    Distribution::from_weights(w)
        .map_err(|_| CompareError::Alignment("mapped hypotheses carry no posterior mass".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryComparison {
    pub trajectory: String,
    pub runs: usize,
    /// Mean over repetitions, over orderings.
    pub model: Distribution,
    pub oracle: Distribution,
    pub jsd: f64,
    pub hellinger: f64,
    pub max_abs_diff: f64,
}

/// One configuration against the optimal observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mode: String,
    pub runs: usize,
    pub trajectories: Vec<TrajectoryComparison>,
    /// Over the concatenated per-trajectory posteriors.
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    /// Why the correlations are missing.
    pub correlation_error: Option<MetricError>,
    pub mean_jsd: f64,
    pub mean_hellinger: f64,
    pub jsd_base: LogBase,
    pub max_abs_diff: f64,
}

impl ComparisonRow {
    pub fn correlations(&self) -> Result<(f64, f64), MetricError> {
        match (&self.correlation_error, self.pearson_r, self.spearman_rho) {
            (Some(e), _, _) => Err(e.clone()),
            (None, Some(r), Some(rho)) => Ok((r, rho)),
            _ => Err(MetricError::DegenerateInput("no correlation computed".into())),
        }
    }
}

/// Per configuration: posteriors are averaged over repetitions for each
/// trajectory, correlations taken over the concatenation of those means in
/// corpus order, and distances averaged over trajectories. Failed and
/// open-ended runs are skipped. Record order does not matter.
pub fn compare_to_oracle(
    records: &[RunRecord],
    oracle: &BTreeMap<String, Distribution>,
    orderings: &[PreferenceOrdering],
) -> Result<Vec<ComparisonRow>, CompareError> {
    let mut sorted: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.task == Task::Restaurants && r.is_ok() && r.final_posterior.is_some())
        .collect();
    if sorted.is_empty() {
        return Err(CompareError::NoRecords);
    }
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    let mut groups: BTreeMap<String, BTreeMap<String, Vec<Distribution>>> = BTreeMap::new();
    for r in sorted {
        let hyps = r
            .hypotheses
            .as_ref()
            .ok_or_else(|| CompareError::Alignment(format!("{} has no hypotheses", r.run_id)))?;
        let aligned = align_posterior(hyps, r.final_posterior.as_ref().expect("filtered"), orderings)?;
        groups
            .entry(r.mode.to_string())
            .or_default()
            .entry(r.trajectory.clone())
            .or_default()
            .push(aligned);
    }

    let corpus_order = trajectory_ids();
    let mut rows = Vec::new();
    for (mode, by_traj) in groups {
        let mut ids: Vec<&String> = by_traj.keys().collect();
        ids.sort_by_key(|id| corpus_order.iter().position(|c| c == *id).unwrap_or(usize::MAX));
        let mut trajectories = Vec::new();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for id in ids {
            let posts = &by_traj[id];
            let reference = oracle
                .get(id)
                .ok_or_else(|| CompareError::Alignment(format!("no oracle posterior for {id}")))?;
            let mut mean = vec![0.0; orderings.len()];
            for p in posts {
                for (m, v) in mean.iter_mut().zip(p.probs()) {
                    *m += v;
                }
            }
            let model = Distribution::from_weights(mean).map_err(|e| CompareError::Alignment(e.to_string()))?;
            xs.extend_from_slice(model.probs());
            ys.extend_from_slice(reference.probs());
            trajectories.push(TrajectoryComparison {
                trajectory: id.clone(),
                runs: posts.len(),
                jsd: jsd(&model, reference)?,
                hellinger: hellinger(&model, reference)?,
                max_abs_diff: model.max_abs_diff(reference),
                oracle: reference.clone(),
                model,
            });
        }
        let (pearson, spearman, correlation_error) = match (pearson_r(&xs, &ys), spearman_rho(&xs, &ys)) {
            (Ok(r), Ok(rho)) => (Some(r), Some(rho), None),
            (Err(e), _) | (_, Err(e)) => (None, None, Some(e)),
        };
        let n = trajectories.len() as f64;
        rows.push(ComparisonRow {
            runs: trajectories.iter().map(|t| t.runs).sum(),
            pearson_r: pearson,
            spearman_rho: spearman,
            correlation_error,
            mean_jsd: trajectories.iter().map(|t| t.jsd).sum::<f64>() / n,
            mean_hellinger: trajectories.iter().map(|t| t.hellinger).sum::<f64>() / n,
            jsd_base: LogBase::Two,
            max_abs_diff: trajectories.iter().map(|t| t.max_abs_diff).fold(0.0, f64::max),
            mode,
            trajectories,
        });
    }
    Ok(rows)
}
