//! Dataset ingestion, the evaluation protocol and model training.

mod dataset;
mod metrics;
mod report;
mod training;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dataset::{contains_stack_trace, ingest_dataset, load_dataset, ChangeRequest, Dataset};
pub use metrics::{
    classify_outcome, quantile, query_effectiveness, reciprocal_rank, retrieval_metrics, Outcome,
    RetrievalMetrics,
};
pub use report::{
    build_report, outcome_report, outcomes_csv, render_text, retrieval_csv, ClassStats,
    GroupReport, OutcomeReport, RankStats, Report, ReportHeader, ReportSettings, SetReport,
    TechniqueReport, ALL_SYSTEMS, REPORT_FORMAT,
};
pub use training::{measure_candidates, train_model, TrainingOutput, TrainingSettings};

use crate::error::{Error, Result};
use crate::learner::Model;
use crate::pipeline::{run_technique, Engine, PipelineConfig, Reformulation, Technique};

pub const DEFAULT_CUTOFFS: [usize; 4] = [10, 20, 50, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRun {
    pub query_id: String,
    pub system: Option<String>,
    pub technique: Technique,
    /// Rank of the first goldset document within the result depth.
    pub qe: Option<usize>,
    /// The executed query body.
    pub terms: Vec<String>,
    pub ranked: Vec<String>,
}

impl QueryRun {
    pub fn reciprocal_rank(&self) -> f64 {
        self.qe.map_or(0.0, |r| 1.0 / r as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub query_id: String,
    pub system: Option<String>,
    pub reformulation: Reformulation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub pipeline: PipelineConfig,
    pub easy_threshold: usize,
    pub cutoffs: Vec<usize>,
    pub config_hash: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            pipeline: PipelineConfig::default(),
            easy_threshold: 10,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
            config_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub runs: Vec<QueryRun>,
    pub audits: Vec<AuditRecord>,
    pub report: Report,
}

fn run_request(
    engine: &Engine,
    req: &ChangeRequest,
    techniques: &[Technique],
    model: Option<&Model>,
    settings: &EvalSettings,
) -> Result<(Vec<QueryRun>, Option<AuditRecord>)> {
    let query = engine.prepare(&req.title)?;
    let ensemble = model.and_then(|m| m.ensemble_for(req.system.as_deref()));
    let mut runs = Vec::with_capacity(techniques.len());
    let mut audit = None;
    for &t in techniques {
        let run = run_technique(engine, &query, t, &settings.pipeline, ensemble)?;
        let ranked: Vec<String> = engine
            .run_query(&query, &run.terms, settings.pipeline.result_depth)
            .hits
            .into_iter()
            .map(|h| h.doc)
            .collect();
        if let Some(r) = run.reformulation {
            audit = Some(AuditRecord {
                query_id: req.id.clone(),
                system: req.system.clone(),
                reformulation: r,
            });
        }
        runs.push(QueryRun {
            query_id: req.id.clone(),
            system: req.system.clone(),
            technique: t,
            qe: query_effectiveness(&ranked, &req.goldset),
            terms: run.terms,
            ranked,
        });
    }
    Ok((runs, audit))
}

/// Runs the baseline and every technique on every request and builds the
/// report. Requests are processed in parallel; output order follows the
/// input order.
pub fn evaluate(
    engine: &Engine,
    requests: &[ChangeRequest],
    techniques: &[Technique],
    model: Option<&Model>,
    settings: &EvalSettings,
) -> Result<Evaluation> {
    if techniques.iter().any(|t| t.needs_model()) && model.is_none() {
        return Err(Error::Config(
            "technique `acer` needs a trained model".into(),
        ));
    }
    let mut all = vec![Technique::Baseline];
    all.extend(techniques.iter().filter(|&&t| t != Technique::Baseline));

    let per_request: Vec<_> = requests
        .par_iter()
        .map(|req| run_request(engine, req, &all, model, settings))
        .collect::<Result<_>>()?;
    let mut runs = Vec::new();
    let mut audits = Vec::new();
    for (r, a) in per_request {
        runs.extend(r);
        audits.extend(a);
    }
    let report = build_report(
        &runs,
        &all,
        &ReportSettings {
            config_hash: settings.config_hash.clone(),
            result_depth: settings.pipeline.result_depth,
            easy_threshold: settings.easy_threshold,
            cutoffs: settings.cutoffs.clone(),
        },
    )?;
    Ok(Evaluation {
        runs,
        audits,
        report,
    })
}

/// Per-query runs as CSV: one row per request and technique.
pub fn runs_csv(runs: &[QueryRun]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["query_id", "system", "technique", "qe", "rr", "query"])
        .expect("in-memory write");
    for r in runs {
        w.write_record([
            r.query_id.as_str(),
            r.system.as_deref().unwrap_or(""),
            r.technique.name(),
            &r.qe.map(|q| q.to_string()).unwrap_or_default(),
            &r.reciprocal_rank().to_string(),
            &r.terms.join(" "),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn audit_jsonl(audits: &[AuditRecord]) -> Result<String> {
    let mut out = String::new();
    for a in audits {
        out.push_str(&serde_json::to_string(a).map_err(|e| Error::Serialize(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// File names written by [`write_evaluation`].
pub const REPORT_FILES: [&str; 6] = [
    "report.json",
    "report.txt",
    "outcomes.csv",
    "retrieval.csv",
    "runs.csv",
    "audit.jsonl",
];

pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut json =
        serde_json::to_string_pretty(&eval.report).map_err(|e| Error::Serialize(e.to_string()))?;
    json.push('\n');
    let contents = [
        json,
        render_text(&eval.report),
        outcomes_csv(&eval.report),
        retrieval_csv(&eval.report),
        runs_csv(&eval.runs),
        audit_jsonl(&eval.audits)?,
    ];
    for (name, body) in REPORT_FILES.iter().zip(contents) {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
