//! Distances between distributions, correlations, and the two-sample test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::distribution::Distribution;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    fn ln_scale(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }
}

fn same_len(a: usize, b: usize) -> Result<(), MetricError> {
    if a == b {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch { left: a, right: b })
    }
}

/// Jensen-Shannon divergence in bits.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64, MetricError> {
    jsd_with_base(p, q, LogBase::Two)
}

pub fn jsd_with_base(p: &Distribution, q: &Distribution, base: LogBase) -> Result<f64, MetricError> {
    same_len(p.len(), q.len())?;
    let mut total = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    let v = total / base.ln_scale();
    // rounding can leave tiny values just outside the bounds
    let upper = match base {
        LogBase::Two => 1.0,
        LogBase::E => std::f64::consts::LN_2,
    };
    Ok(v.clamp(0.0, upper))
}

pub fn hellinger(p: &Distribution, q: &Distribution) -> Result<f64, MetricError> {
    same_len(p.len(), q.len())?;
    let sq: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(&a, &b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((sq.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricError> {
    same_len(x.len(), y.len())?;
    if x.len() < 3 {
        return Err(MetricError::DegenerateInput(format!(
            "need at least 3 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricError::DegenerateInput("non-finite value".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(MetricError::DegenerateInput("constant vector".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::DegenerateInput("constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub dof: usize,
    pub cohens_d: f64,
    pub p_value: f64,
}

/// Pooled-variance two-sample t test, two-sided, with Cohen's d on the
/// pooled standard deviation. `a` and `b` may differ in length.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<TTest, MetricError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricError::DegenerateInput("each group needs at least 2 values".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::DegenerateInput("non-finite value".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let ssa: f64 = a.iter().map(|v| (v - ma).powi(2)).sum();
    let ssb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
    let dof = a.len() + b.len() - 2;
    let pooled_var = (ssa + ssb) / dof as f64;
    let diff = ma - mb;
    if is_constant(a) && is_constant(b) {
        if a[0] == b[0] {
            return Ok(TTest {
                t: 0.0,
                dof,
                cohens_d: 0.0,
                p_value: 1.0,
            });
        }
        return Err(MetricError::DegenerateInput("zero variance".into()));
    }
    let sd = pooled_var.sqrt();
    let t = diff / (sd * (1.0 / na + 1.0 / nb).sqrt());
    let dist = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| MetricError::DegenerateInput(e.to_string()))?;
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        dof,
        cohens_d: diff / sd,
        p_value,
    })
}

/// Summary of one model-versus-reference comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub jsd: f64,
    pub jsd_base: LogBase,
    pub hellinger: f64,
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub t_test: Option<TTest>,
}
