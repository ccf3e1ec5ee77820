//! Candidate selection: labelling, CART ensemble training and prediction.

mod ensemble;
mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ensemble::{train, Ensemble, EnsembleConfig, Model, GLOBAL_MODEL};
pub use tree::{fit_tree, Node, Tree, TreeConfig};

use crate::error::{Error, Result};
use crate::extract::SigKind;
use crate::quality::{QualityVector, METRIC_COUNT, METRIC_NAMES};

/// Candidate kinds in priority order; earlier kinds win ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Msig,
    Fsig,
    Comb,
    Baseline,
}

impl CandidateKind {
    pub const ALL: [CandidateKind; 4] = [
        CandidateKind::Msig,
        CandidateKind::Fsig,
        CandidateKind::Comb,
        CandidateKind::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CandidateKind::Msig => "msig",
            CandidateKind::Fsig => "fsig",
            CandidateKind::Comb => "comb",
            CandidateKind::Baseline => "baseline",
        }
    }
}

impl From<SigKind> for CandidateKind {
    fn from(k: SigKind) -> Self {
        match k {
            SigKind::Msig => CandidateKind::Msig,
            SigKind::Fsig => CandidateKind::Fsig,
            SigKind::Comb => CandidateKind::Comb,
        }
    }
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CandidateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CandidateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown candidate kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub query_id: String,
    pub kind: CandidateKind,
    pub features: QualityVector,
    pub label: bool,
}

/// One candidate of a training query with its measured effectiveness.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredCandidate {
    pub kind: CandidateKind,
    pub features: QualityVector,
    /// Rank of the first relevant document, `None` if not retrieved.
    pub qe: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryCandidates {
    pub query_id: String,
    pub candidates: Vec<MeasuredCandidate>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labelled {
    pub rows: Vec<TrainingRow>,
    /// Queries for which no candidate retrieved a relevant document.
    pub flagged: Vec<String>,
}

/// Mark the candidate with the lowest QE as positive. A missing QE ranks
/// last and ties go to the earlier kind, so every query gets exactly one
/// positive row, even when no candidate found anything.
pub fn label_rows(queries: &[QueryCandidates]) -> Labelled {
    let mut out = Labelled::default();
    for q in queries {
        if q.candidates.iter().all(|c| c.qe.is_none()) {
            out.flagged.push(q.query_id.clone());
        }
        let best_kind = q
            .candidates
            .iter()
            .map(|c| (c.qe.unwrap_or(usize::MAX), c.kind))
            .min()
            .map(|(_, k)| k);
        out.rows.extend(q.candidates.iter().map(|c| TrainingRow {
            query_id: q.query_id.clone(),
            kind: c.kind,
            features: c.features,
            label: Some(c.kind) == best_kind,
        }));
    }
    out
}

/// A reformulation candidate ready for selection. For the baseline kind
/// `terms` holds the preprocessed initial query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub terms: Vec<String>,
    pub features: QualityVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub kind: CandidateKind,
    /// The chosen candidate's terms, or the initial terms repeated twice
    /// when the baseline wins.
    pub terms: Vec<String>,
    /// Predicted probability per input candidate, in input order.
    pub probabilities: Vec<f64>,
}

/// Index of the highest probability; exact ties go to the higher-priority kind.
pub fn argmax_by_priority(kinds: &[CandidateKind], probabilities: &[f64]) -> Option<usize> {
    (0..kinds.len()).min_by(|&a, &b| {
        probabilities[b]
            .total_cmp(&probabilities[a])
            .then(kinds[a].cmp(&kinds[b]))
    })
}

pub fn repeat_terms(terms: &[String]) -> Vec<String> {
    terms.iter().chain(terms).cloned().collect()
}

pub fn select_best(candidates: &[Candidate], ensemble: &Ensemble) -> Option<Selection> {
    let probabilities: Vec<f64> = candidates
        .iter()
        .map(|c| ensemble.predict(&c.features))
        .collect();
    let kinds: Vec<CandidateKind> = candidates.iter().map(|c| c.kind).collect();
    let best = &candidates[argmax_by_priority(&kinds, &probabilities)?];
    let terms = match best.kind {
        CandidateKind::Baseline => repeat_terms(&best.terms),
        _ => best.terms.clone(),
    };
    Some(Selection {
        kind: best.kind,
        terms,
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: usize,
    /// Queries with a positive row that were scored.
    pub evaluated: usize,
    /// Scored queries whose selected kind carried the positive label.
    pub correct: usize,
}

impl CrossValidation {
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }
}

/// k-fold cross-validation that never splits one query's rows across folds.
pub fn cross_validate(
    rows: &[TrainingRow],
    config: &EnsembleConfig,
    seed: u64,
    folds: usize,
) -> CrossValidation {
    let mut ids: Vec<&str> = rows
        .iter()
        .map(|r| r.query_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds = folds.clamp(1, ids.len().max(1));
    let fold_of: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, &q)| (q, i % folds))
        .collect();

    let mut result = CrossValidation {
        folds,
        evaluated: 0,
        correct: 0,
    };
    for fold in 0..folds {
        let train_rows: Vec<TrainingRow> = rows
            .iter()
            .filter(|r| fold_of[r.query_id.as_str()] != fold)
            .cloned()
            .collect();
        if train_rows.is_empty() {
            continue;
        }
        let model = train(&train_rows, config, seed);
        let mut held: BTreeMap<&str, Vec<&TrainingRow>> = BTreeMap::new();
        for r in rows.iter().filter(|r| fold_of[r.query_id.as_str()] == fold) {
            held.entry(&r.query_id).or_default().push(r);
        }
        for group in held.values() {
            if !group.iter().any(|r| r.label) {
                continue;
            }
            let kinds: Vec<CandidateKind> = group.iter().map(|r| r.kind).collect();
            let probs: Vec<f64> = group.iter().map(|r| model.predict(&r.features)).collect();
            let pick = argmax_by_priority(&kinds, &probs).expect("nonempty group");
            result.evaluated += 1;
            if group[pick].label {
                result.correct += 1;
            }
        }
    }
    result
}

fn csv_err(e: csv::Error) -> Error {
    Error::format("training data", e)
}

/// Write rows as CSV: `query_id,kind,<metrics...>,label`.
pub fn write_training_rows<W: Write>(rows: &[TrainingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["query_id", "kind"];
    header.extend(METRIC_NAMES);
    header.push("label");
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.query_id.clone(), r.kind.to_string()];
        rec.extend(r.features.values().iter().map(|v| v.to_string()));
        rec.push(u8::from(r.label).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format("training data", e))
}

pub fn read_training_rows<R: Read>(input: R) -> Result<Vec<TrainingRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let expected: Vec<&str> = ["query_id", "kind"]
        .into_iter()
        .chain(METRIC_NAMES)
        .chain(["label"])
        .collect();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::format("training data", "unexpected header"));
    }
    let bad =
        |line: u64, what: &str| Error::format("training data", format!("line {line}: {what}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let kind = rec[1].parse().map_err(|e: String| bad(line, &e))?;
        let mut features = [0.0; METRIC_COUNT];
        for (i, f) in features.iter_mut().enumerate() {
            *f = rec[2 + i]
                .parse()
                .map_err(|_| bad(line, "non-numeric metric"))?;
        }
        let label = match &rec[2 + METRIC_COUNT] {
            "1" => true,
            "0" => false,
            _ => return Err(bad(line, "label must be 0 or 1")),
        };
        rows.push(TrainingRow {
            query_id: rec[0].to_string(),
            kind,
            features: QualityVector(features),
            label,
        });
    }
    Ok(rows)
}
