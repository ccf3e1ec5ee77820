//! Builds labelled candidate rows from a dataset and trains the selector.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;

use super::dataset::ChangeRequest;
use super::metrics::query_effectiveness;
use crate::error::{Error, Result};
use crate::learner::{
    cross_validate, label_rows, train, CrossValidation, EnsembleConfig, MeasuredCandidate, Model,
    QueryCandidates, TrainingRow, GLOBAL_MODEL,
};
use crate::pipeline::{build_candidates, Engine, PipelineConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSettings {
    pub pipeline: PipelineConfig,
    pub ensemble: EnsembleConfig,
    pub seed: u64,
    /// Also train one ensemble per system, next to the global one.
    pub per_system: bool,
    pub folds: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        TrainingSettings {
            pipeline: PipelineConfig::default(),
            ensemble: EnsembleConfig::default(),
            seed: 0,
            per_system: false,
            folds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutput {
    pub model: Model,
    pub rows: Vec<TrainingRow>,
    /// Queries where no candidate retrieved a relevant document.
    pub flagged: Vec<String>,
    /// Queries skipped because the initial query retrieved nothing.
    pub no_feedback: Vec<String>,
    pub cross_validation: CrossValidation,
}

/// The four candidates of one request with their measured ranks, or `None`
/// when the initial query retrieves nothing to mine.
pub fn measure_candidates(
    engine: &Engine,
    req: &ChangeRequest,
    config: &PipelineConfig,
) -> Result<Option<QueryCandidates>> {
    let query = engine.prepare(&req.title)?;
    let feedback = engine.feedback(&query, config.feedback_size);
    if feedback.is_empty() {
        return Ok(None);
    }
    let candidates = build_candidates(engine, &query, &feedback, config)?
        .into_iter()
        .map(|c| {
            let ranked: Vec<String> = engine
                .run_query(&query, &c.terms, config.result_depth)
                .hits
                .into_iter()
                .map(|h| h.doc)
                .collect();
            MeasuredCandidate {
                kind: c.kind,
                features: c.features,
                qe: query_effectiveness(&ranked, &req.goldset),
            }
        })
        .collect();
    Ok(Some(QueryCandidates {
        query_id: req.id.clone(),
        candidates,
    }))
}

pub fn train_model(
    engine: &Engine,
    requests: &[ChangeRequest],
    settings: &TrainingSettings,
) -> Result<TrainingOutput> {
    let measured: Vec<Option<QueryCandidates>> = requests
        .par_iter()
        .map(|r| measure_candidates(engine, r, &settings.pipeline))
        .collect::<Result<_>>()?;

    let mut no_feedback = Vec::new();
    let mut queries = Vec::new();
    let mut system_of = BTreeMap::new();
    for (req, m) in requests.iter().zip(measured) {
        match m {
            Some(q) => {
                system_of.insert(req.id.clone(), req.system.clone());
                queries.push(q);
            }
            None => {
                warn!(
                    "request {}: initial query retrieved nothing; not used for training",
                    req.id
                );
                no_feedback.push(req.id.clone());
            }
        }
    }
    if queries.is_empty() {
        return Err(Error::Dataset(
            "no request produced reformulation candidates".into(),
        ));
    }
    let labelled = label_rows(&queries);
    for q in &labelled.flagged {
        warn!("request {q}: no candidate retrieved a goldset document");
    }

    let rows = labelled.rows;
    let mut ensembles = BTreeMap::from([(
        GLOBAL_MODEL.to_string(),
        train(&rows, &settings.ensemble, settings.seed),
    )]);
    if settings.per_system {
        let mut by_system: BTreeMap<&str, Vec<TrainingRow>> = BTreeMap::new();
        for r in &rows {
            if let Some(s) = system_of[&r.query_id].as_deref() {
                by_system.entry(s).or_default().push(r.clone());
            }
        }
        for (system, subset) in by_system {
            info!("training system `{system}` on {} rows", subset.len());
            ensembles.insert(
                system.to_string(),
                train(&subset, &settings.ensemble, settings.seed),
            );
        }
    }
    let cross_validation = cross_validate(&rows, &settings.ensemble, settings.seed, settings.folds);
    Ok(TrainingOutput {
        model: Model::from_map(ensembles),
        rows,
        flagged: labelled.flagged,
        no_feedback,
        cross_validation,
    })
}
