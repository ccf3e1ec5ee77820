//! Rank-based effectiveness measures.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// 1-based rank of the first relevant document, if any.
pub fn query_effectiveness<S: AsRef<str>>(
    ranked: &[S],
    goldset: &BTreeSet<String>,
) -> Option<usize> {
    ranked
        .iter()
        .position(|id| goldset.contains(id.as_ref()))
        .map(|i| i + 1)
}

/// `1 / qe` when the first hit is within the top `k`, else 0.
pub fn reciprocal_rank(qe: Option<usize>, k: usize) -> f64 {
    match qe {
        Some(r) if r <= k => 1.0 / r as f64,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub k: usize,
    pub mrr: f64,
    /// Fraction of queries with a relevant document in the top `k`.
    pub accuracy: f64,
}

/// MRR@k and Top-k accuracy; zero for an empty run list.
pub fn retrieval_metrics(qes: &[Option<usize>], k: usize) -> RetrievalMetrics {
    if qes.is_empty() {
        return RetrievalMetrics {
            k,
            mrr: 0.0,
            accuracy: 0.0,
        };
    }
    let n = qes.len() as f64;
    let mrr = qes.iter().map(|&q| reciprocal_rank(q, k)).sum::<f64>() / n;
    let hits = qes.iter().filter(|q| q.is_some_and(|r| r <= k)).count();
    RetrievalMetrics {
        k,
        mrr,
        accuracy: hits as f64 / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Improved,
    Worsened,
    Preserved,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Improved, Outcome::Worsened, Outcome::Preserved];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Improved => "improved",
            Outcome::Worsened => "worsened",
            Outcome::Preserved => "preserved",
        }
    }
}

/// Compares QEs; a missing rank loses to any rank. `None` when both are
/// missing.
pub fn classify_outcome(baseline: Option<usize>, reformulated: Option<usize>) -> Option<Outcome> {
    use std::cmp::Ordering::*;
    let key = |q: Option<usize>| q.unwrap_or(usize::MAX);
    match (baseline, reformulated) {
        (None, None) => None,
        _ => Some(match key(reformulated).cmp(&key(baseline)) {
            Less => Outcome::Improved,
            Greater => Outcome::Worsened,
            Equal => Outcome::Preserved,
        }),
    }
}

/// Quantile by linear interpolation between closest ranks (Hyndman-Fan
/// type 7). `sorted` must be ascending and nonempty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
