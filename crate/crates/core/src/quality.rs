//! Pre-retrieval query quality metrics.
//!
//! Four families: specificity (IDF, ICTF, query scope, simplified clarity),
//! similarity to the collection (SCQ), coherency of the documents containing
//! each term, and pairwise term relatedness (PMI over document co-occurrence).
//! Averages run over the query term multiset; scope, clarity and PMI use the
//! distinct terms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;

pub const METRIC_NAMES: [&str; 14] = [
    "avg_idf",
    "max_idf",
    "dev_idf",
    "avg_ictf",
    "max_ictf",
    "dev_ictf",
    "query_scope",
    "scs",
    "avg_scq",
    "max_scq",
    "sum_scq",
    "avg_coherence",
    "avg_pmi",
    "max_pmi",
];

pub const METRIC_COUNT: usize = METRIC_NAMES.len();

/// Number of top documents per term used for coherence.
const COHERENCE_DOCS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityVector(pub [f64; METRIC_COUNT]);

impl QualityVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        METRIC_NAMES.iter().copied().zip(self.0.iter().copied())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `ln(total / ctf)`, with `ln(total + 1)` for unseen terms.
fn ictf(index: &Index, ctf: u64) -> f64 {
    let total = index.total_terms() as f64;
    if ctf == 0 {
        (total + 1.0).ln()
    } else {
        (total / ctf as f64).ln()
    }
}

/// Mean pairwise cosine among the top documents containing `term`.
fn term_coherence(index: &Index, term: &str) -> f64 {
    let Some(id) = index.term_id(term) else {
        return 0.0;
    };
    let mut docs: Vec<(u32, u32)> = index.postings(id).to_vec();
    docs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    docs.truncate(COHERENCE_DOCS);
    if docs.len() < 2 {
        return 0.0;
    }
    let (mut sum, mut pairs) = (0.0, 0usize);
    for i in 0..docs.len() {
        for j in i + 1..docs.len() {
            sum += index.cosine(docs[i].0, docs[j].0);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

fn pmi(index: &Index, a: &str, b: &str) -> f64 {
    let n = index.doc_count() as f64;
    let joint = index.co_doc_frequency(a, b);
    if joint == 0 {
        return -n.ln();
    }
    let pa = index.term_stats(a).df as f64 / n;
    let pb = index.term_stats(b).df as f64 / n;
    ((joint as f64 / n) / (pa * pb)).ln()
}

pub fn compute_quality_metrics(query_terms: &[String], index: &Index) -> Result<QualityVector> {
    if query_terms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let total = index.total_terms() as f64;
    let stats: Vec<_> = query_terms.iter().map(|t| index.term_stats(t)).collect();

    let idfs: Vec<f64> = stats.iter().map(|s| s.idf).collect();
    let ictfs: Vec<f64> = stats.iter().map(|s| ictf(index, s.ctf)).collect();
    let scqs: Vec<f64> = stats
        .iter()
        .map(|s| {
            if s.ctf == 0 {
                0.0
            } else {
                (1.0 + (s.ctf as f64).ln()) * s.idf
            }
        })
        .collect();

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in query_terms {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let distinct: Vec<&str> = counts.keys().copied().collect();

    let scope = index.docs_matching_any(distinct.iter().copied()) as f64 / index.doc_count() as f64;

    let qlen = query_terms.len() as f64;
    let scs = counts
        .iter()
        .map(|(t, &c)| {
            let p_q = c as f64 / qlen;
            let ctf = index.term_stats(t).ctf;
            let p_c = if ctf == 0 {
                1.0 / (total + 1.0)
            } else {
                ctf as f64 / total
            };
            p_q * (p_q / p_c).ln()
        })
        .sum();

    let coherence_by_term: BTreeMap<&str, f64> = distinct
        .iter()
        .map(|&t| (t, term_coherence(index, t)))
        .collect();
    let coherences: Vec<f64> = query_terms
        .iter()
        .map(|t| coherence_by_term[t.as_str()])
        .collect();

    let mut pmis = Vec::new();
    let pairs: BTreeSet<(&str, &str)> = distinct
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| distinct[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    for (a, b) in pairs {
        pmis.push(pmi(index, a, b));
    }
    let (avg_pmi, max_pmi) = if pmis.is_empty() {
        (0.0, 0.0)
    } else {
        (mean(&pmis), max(&pmis))
    };

    Ok(QualityVector([
        mean(&idfs),
        max(&idfs),
        std_dev(&idfs),
        mean(&ictfs),
        max(&ictfs),
        std_dev(&ictfs),
        scope,
        scs,
        mean(&scqs),
        max(&scqs),
        scqs.iter().sum(),
        mean(&coherences),
        avg_pmi,
        max_pmi,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn terms(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn index() -> Index {
        Index::from_term_lists(&[
            ("d1", terms("alpha common beta")),
            ("d2", terms("common gamma")),
            ("d3", terms("common delta beta")),
        ])
        .unwrap()
    }

    #[test]
    fn single_rare_term() {
        let q = compute_quality_metrics(&terms("alpha"), &index()).unwrap();
        assert_abs_diff_eq!(q.get("avg_idf").unwrap(), 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.get("avg_idf").unwrap(), 1.0986, epsilon = 1e-4);
        assert_eq!(q.get("max_idf"), q.get("avg_idf"));
        assert_eq!(q.get("dev_idf").unwrap(), 0.0);
        assert_eq!(q.get("avg_pmi").unwrap(), 0.0);
        assert_abs_diff_eq!(q.get("query_scope").unwrap(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ubiquitous_term() {
        let q = compute_quality_metrics(&terms("common"), &index()).unwrap();
        assert_eq!(q.get("query_scope").unwrap(), 1.0);
        assert_eq!(q.get("avg_idf").unwrap(), 0.0);
        assert_eq!(q.get("sum_scq").unwrap(), 0.0);
    }

    #[test]
    fn never_cooccurring_terms_hit_pmi_floor() {
        let q = compute_quality_metrics(&terms("alpha gamma"), &index()).unwrap();
        assert_abs_diff_eq!(q.get("avg_pmi").unwrap(), -(3f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(q.get("max_pmi").unwrap(), -(3f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn pmi_hand_value() {
        // beta in d1,d3; alpha in d1; joint 1 => ln((1/3) / ((1/3)(2/3))) = ln 1.5
        let q = compute_quality_metrics(&terms("alpha beta"), &index()).unwrap();
        assert_abs_diff_eq!(q.get("avg_pmi").unwrap(), 1.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn oov_terms_use_ceilings() {
        let idx = index();
        let q = compute_quality_metrics(&terms("unseen"), &idx).unwrap();
        assert_abs_diff_eq!(q.get("avg_idf").unwrap(), 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            q.get("avg_ictf").unwrap(),
            (idx.total_terms() as f64 + 1.0).ln(),
            epsilon = 1e-12
        );
        assert!(q.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_query_is_an_error() {
        assert!(matches!(
            compute_quality_metrics(&[], &index()),
            Err(Error::EmptyQuery)
        ));
    }

    #[test]
    fn coherence_of_shared_documents() {
        let idx = index();
        // beta: d1 and d3
        let expected = idx.cosine(0, 2);
        let q = compute_quality_metrics(&terms("beta"), &idx).unwrap();
        assert_abs_diff_eq!(q.get("avg_coherence").unwrap(), expected, epsilon = 1e-12);
        let single = compute_quality_metrics(&terms("gamma"), &idx).unwrap();
        assert_eq!(single.get("avg_coherence").unwrap(), 0.0);
    }

    #[test]
    fn repetition_changes_only_sum_metrics() {
        let idx = index();
        let once = compute_quality_metrics(&terms("alpha beta"), &idx).unwrap();
        let twice = compute_quality_metrics(&terms("alpha beta alpha beta"), &idx).unwrap();
        for (name, v) in once.named() {
            let w = twice.get(name).unwrap();
            if name == "sum_scq" {
                assert_abs_diff_eq!(w, 2.0 * v, epsilon = 1e-12);
            } else {
                assert_abs_diff_eq!(w, v, epsilon = 1e-12);
            }
        }
    }
}
