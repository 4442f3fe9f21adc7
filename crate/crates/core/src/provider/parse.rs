//! Turns free-form model replies into validated values.
//!
//! Structured JSON is preferred; line-oriented number extraction is the
//! fallback. All functions are total: any input yields a value or
//! [`ProviderError::ParseFailure`].

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde_json::Value;

use super::ProviderError;
use crate::distribution::Distribution;

/// Lower bound applied to every parsed probability before normalizing.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

static JSON_ARRAY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[^\[\]]*\]").unwrap());
static JSON_OBJECT_ARRAY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)\[\s*\{.*\}\s*\]").unwrap());
static LABELED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[^\w.])[A-Za-z][\w()\-]*\s*[:=]\s*(-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)\s*(%)?").unwrap()
});
static NUMBERED_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:[-*•]\s*)?(?:\*\*)?\(?(?:[Hh](?:ypothesis)?\s*)?\d+(?:\*\*)?\s*[.):\-]\s*(?:\*\*)?\s*(.*)$").unwrap()
});
static BULLET_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*[-*•]\s+(.*)$").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)\s*(%)?").unwrap()
});
static TRAILING_PROB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[\s\-–—:,;|]*[(\[]?\s*(?:(?:prior\s+)?(?:probability|likelihood|prior|prob|p)\s*[:=]?\s*)?-?(?:\d+(?:\.\d*)?|\.\d+)\s*%?\s*[)\]]?\s*[.;,]?\s*$").unwrap()
});

#[derive(Debug, Clone, Copy)]
struct Raw {
    value: f64,
    percent: bool,
}

fn failure(msg: impl Into<String>) -> ProviderError {
    ProviderError::ParseFailure(msg.into())
}

/// Extracts exactly `k` probabilities from `text`.
pub fn parse_distribution(text: &str, k: usize) -> Result<Distribution, ProviderError> {
    if k == 0 {
        return Err(failure("expected zero probabilities"));
    }
    let raw = extract_numbers(text, k)?;
    finalize(&raw)
}

fn extract_numbers(text: &str, k: usize) -> Result<Vec<Raw>, ProviderError> {
    // Structured block: the last numeric JSON array of the right length.
    let arrays: Vec<Vec<f64>> = JSON_ARRAY
        .find_iter(text)
        .filter_map(|m| serde_json::from_str::<Vec<f64>>(m.as_str()).ok())
        .filter(|a| !a.is_empty())
        .collect();
    if let Some(a) = arrays.iter().rev().find(|a| a.len() == k) {
        return Ok(a.iter().map(|&value| Raw { value, percent: false }).collect());
    }
    if let Some(a) = arrays.last() {
        return Err(failure(format!("expected {k} probabilities, found a list of {}", a.len())));
    }

    let labeled: Vec<Raw> = LABELED
        .captures_iter(text)
        .filter_map(|c| raw_from(&c[1], c.get(2).is_some()))
        .collect();
    if !labeled.is_empty() {
        return count_checked(labeled, k);
    }

    let numbered: Vec<Raw> = text
        .lines()
        .filter_map(|line| NUMBERED_LINE.captures(line))
        .filter_map(|c| last_number(c.get(1).map_or("", |m| m.as_str())))
        .collect();
    if !numbered.is_empty() {
        return count_checked(numbered, k);
    }

    let bare: Vec<Raw> = NUMBER
        .captures_iter(text)
        .filter_map(|c| raw_from(&c[1], c.get(2).is_some()))
        .collect();
    if bare.is_empty() {
        return Err(failure("no numbers in reply"));
    }
    count_checked(bare, k)
}

fn count_checked(values: Vec<Raw>, k: usize) -> Result<Vec<Raw>, ProviderError> {
    if values.len() == k {
        Ok(values)
    } else {
        Err(failure(format!("expected {k} probabilities, found {}", values.len())))
    }
}

fn raw_from(number: &str, percent: bool) -> Option<Raw> {
    number.parse::<f64>().ok().map(|value| Raw { value, percent })
}

fn last_number(s: &str) -> Option<Raw> {
    NUMBER
        .captures_iter(s)
        .last()
        .and_then(|c| raw_from(&c[1], c.get(2).is_some()))
}

/// Percent handling, clamping to [0, 1], flooring, normalizing. Values
/// written without `%` are read as percentages when any exceeds 1 and none
/// exceeds 100.
fn finalize(raw: &[Raw]) -> Result<Distribution, ProviderError> {
    let as_percent = !raw.iter().any(|r| r.percent)
        && raw.iter().any(|r| r.value > 1.0)
        && raw.iter().all(|r| r.value <= 100.0);
    let weights: Vec<f64> = raw
        .iter()
        .map(|r| {
            let v = if r.percent || as_percent { r.value / 100.0 } else { r.value };
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            v.max(PROBABILITY_FLOOR)
        })
        .collect();
    Distribution::from_weights(weights).map_err(|e| failure(e.to_string()))
}

/// Extracts exactly `expected_n` hypotheses with prior probabilities, in
/// the order given.
pub fn parse_hypotheses(
    text: &str,
    expected_n: usize,
) -> Result<(Vec<String>, Distribution), ProviderError> {
    if expected_n == 0 {
        return Err(failure("expected zero hypotheses"));
    }
    if let Some(items) = json_hypotheses(text) {
        if items.len() == expected_n {
            let (texts, raw): (Vec<_>, Vec<_>) = items.into_iter().unzip();
            return Ok((texts, finalize(&raw)?));
        }
    }

    let mut items: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if let Some(c) = NUMBERED_LINE.captures(line) {
            let head = c.get(1).map_or("", |m| m.as_str()).to_string();
            items.push((head.clone(), head));
        } else if let Some((_, body)) = items.last_mut() {
            if !line.trim().is_empty() {
                body.push(' ');
                body.push_str(line.trim());
            }
        }
    }
    if items.is_empty() {
        return Err(failure("no numbered hypothesis list"));
    }
    if items.len() != expected_n {
        return Err(failure(format!(
            "expected {expected_n} hypotheses, found {}",
            items.len()
        )));
    }
    let mut texts = Vec::with_capacity(items.len());
    let mut raw = Vec::with_capacity(items.len());
    for (i, (head, body)) in items.iter().enumerate() {
        let prob = last_number(body)
            .ok_or_else(|| failure(format!("hypothesis {} has no probability", i + 1)))?;
        let text = clean_hypothesis(head);
        if text.is_empty() {
            return Err(failure(format!("hypothesis {} has no text", i + 1)));
        }
        texts.push(text);
        raw.push(prob);
    }
    Ok((texts, finalize(&raw)?))
}

fn clean_hypothesis(head: &str) -> String {
    let stripped = head.replace("**", "");
    let mut s = stripped.trim().to_string();
    // A head ending in a probability loses it; one written on a following
    // line leaves the head untouched.
    if let Some(m) = TRAILING_PROB.find(&s) {
        if m.start() > 0 {
            s.truncate(m.start());
        }
    }
    s.trim_end_matches([' ', '-', '–', '—', ':', ',', ';', '|', '('])
        .trim()
        .to_string()
}

fn json_hypotheses(text: &str) -> Option<Vec<(String, Raw)>> {
    let m = JSON_OBJECT_ARRAY.find(text)?;
    let value: Value = serde_json::from_str(m.as_str()).ok()?;
    value
        .as_array()?
        .iter()
        .map(|item| {
            let text = ["text", "hypothesis", "description"]
                .iter()
                .find_map(|k| item.get(*k)?.as_str())?
                .trim()
                .to_string();
            let value = ["probability", "prior", "likelihood", "p"]
                .iter()
                .find_map(|k| item.get(*k)?.as_f64())?;
            (!text.is_empty()).then_some((text, Raw { value, percent: false }))
        })
        .collect()
}

/// Extracts exactly `k` distinct free-text actions.
pub fn parse_action_list(text: &str, k: usize) -> Result<Vec<String>, ProviderError> {
    if k == 0 {
        return Err(failure("expected zero actions"));
    }
    let from_json = JSON_OBJECT_ARRAY
        .find(text)
        .into_iter()
        .chain(JSON_ARRAY.find_iter(text))
        .filter_map(|m| serde_json::from_str::<Vec<String>>(m.as_str()).ok())
        .filter(|v| !v.is_empty())
        .last();
    let actions: Vec<String> = match from_json {
        Some(v) => v,
        None => text
            .lines()
            .filter_map(|l| {
                NUMBERED_LINE
                    .captures(l)
                    .or_else(|| BULLET_LINE.captures(l))
                    .map(|c| c[1].replace("**", "").trim().to_string())
            })
            .collect(),
    };
    let actions: Vec<String> = actions
        .into_iter()
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .collect();
    if actions.len() != k {
        return Err(failure(format!("expected {k} actions, found {}", actions.len())));
    }
    let mut seen = HashSet::new();
    for a in &actions {
        if !seen.insert(a.to_lowercase()) {
            return Err(failure(format!("duplicate action {a:?}")));
        }
    }
    Ok(actions)
}
