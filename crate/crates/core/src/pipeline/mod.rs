//! End-to-end reformulation: feedback search, signature candidates ranked by
//! CodeRank, quality scoring and model-driven selection.

mod baselines;
mod engine;

use log::warn;
use serde::{Deserialize, Serialize};

pub use baselines::{baseline_terms, run_technique, Method, Scope, Technique, TechniqueRun};
pub use engine::Engine;

use crate::corpus::Preprocessor;
use crate::error::{Error, Result};
use crate::extract::{collect_candidate_tokens, SigKind, SignatureTokens};
use crate::graph::{build_term_graph, code_rank, ranked_terms, RankParams, RankedTerm};
use crate::index::{DocIdx, RankedResults};
use crate::learner::{repeat_terms, select_best, Candidate, CandidateKind, Ensemble};
use crate::quality::{compute_quality_metrics, QualityVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Number of pseudo-relevant documents (K).
    pub feedback_size: usize,
    /// Number of terms appended by a reformulation (k).
    pub reformulation_size: usize,
    pub rank: RankParams,
    /// Ranked lists are cut at this depth; deeper hits count as misses.
    pub result_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            feedback_size: 10,
            reformulation_size: 10,
            rank: RankParams::default(),
            result_depth: 5000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feedback_size == 0 || self.reformulation_size == 0 || self.result_depth == 0 {
            return Err(Error::Config(
                "feedback size, reformulation size and result depth must be at least 1".into(),
            ));
        }
        let r = &self.rank;
        if !(r.damping > 0.0 && r.damping < 1.0) || r.tolerance <= 0.0 || r.max_iterations == 0 {
            return Err(Error::Config(
                "damping must lie in (0,1), tolerance be positive and iterations at least 1".into(),
            ));
        }
        if r.window < 2 {
            return Err(Error::Config(
                "co-occurrence window must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// A preprocessed query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedQuery {
    pub text: String,
    /// Preprocessed terms (Q_pp).
    pub terms: Vec<String>,
    /// Structured identifiers of the text, kept verbatim for matching.
    pub identifiers: Vec<String>,
}

impl PreparedQuery {
    /// The term list sent to the index for a given query body.
    pub fn executed(&self, terms: &[String]) -> Vec<String> {
        terms.iter().chain(&self.identifiers).cloned().collect()
    }
}

impl Engine {
    pub fn prepare(&self, text: &str) -> Result<PreparedQuery> {
        let p = self.preprocessor();
        let terms = p.preprocess_text(text);
        if terms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let identifiers = if p.options().keep_original_tokens {
            p.structured_tokens(text)
        } else {
            Vec::new()
        };
        Ok(PreparedQuery {
            text: text.to_string(),
            terms,
            identifiers,
        })
    }

    pub fn run_query(
        &self,
        query: &PreparedQuery,
        terms: &[String],
        depth: usize,
    ) -> RankedResults {
        self.index().search(&query.executed(terms), depth)
    }

    /// Pseudo-relevance feedback: the top-`k` documents of the initial query.
    pub fn feedback(&self, query: &PreparedQuery, k: usize) -> Vec<DocIdx> {
        self.run_query(query, &query.terms, k)
            .hits
            .iter()
            .map(|h| self.index().doc_index(&h.doc).expect("hit is indexed"))
            .collect()
    }

    pub fn signature_tokens(&self, feedback: &[DocIdx], kind: SigKind) -> SignatureTokens {
        let docs: Vec<_> = feedback.iter().map(|&d| self.signatures(d)).collect();
        collect_candidate_tokens(&docs, kind, self.preprocessor().splitter())
    }
}

/// The ranked expansion terms drawn from one signature context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrCandidate {
    pub kind: SigKind,
    pub terms: Vec<RankedTerm>,
    pub token_count: usize,
    pub vertex_count: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl QrCandidate {
    /// True when the context produced no usable terms.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_strings(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.term.clone()).collect()
    }
}

/// Ranks the terms of `tokens` by CodeRank and keeps the best `k` that are
/// not in `exclude`.
pub fn get_qr_candidate(
    tokens: &SignatureTokens,
    preprocessor: &Preprocessor,
    params: &RankParams,
    k: usize,
    exclude: &[String],
) -> QrCandidate {
    let graph = build_term_graph(tokens, preprocessor, params.window);
    let scores = code_rank(&graph, params);
    let terms = ranked_terms(&scores)
        .into_iter()
        .filter(|t| !exclude.contains(&t.term))
        .take(k)
        .collect();
    QrCandidate {
        kind: tokens.kind,
        terms,
        token_count: tokens.len(),
        vertex_count: graph.vertex_count(),
        iterations: scores.iterations,
        converged: scores.converged,
    }
}

/// Initial terms followed by the expansion terms they do not already contain.
pub fn combine(initial: &[String], expansion: &[String]) -> Vec<String> {
    let mut out = initial.to_vec();
    for t in expansion {
        if !out.contains(t) {
            out.push(t.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCandidate {
    pub kind: CandidateKind,
    /// Expansion terms with their normalised CodeRank scores.
    pub expansion: Vec<RankedTerm>,
    /// The candidate query: initial plus expansion terms, or the initial
    /// terms alone for the baseline.
    pub terms: Vec<String>,
    pub features: QualityVector,
    pub probability: Option<f64>,
}

impl AuditCandidate {
    pub fn to_candidate(&self) -> Candidate {
        Candidate {
            kind: self.kind,
            terms: self.terms.clone(),
            features: self.features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Chosen by the ensemble.
    Model,
    /// No ensemble supplied; candidates are reported without a choice.
    PassThrough,
    /// The initial query found nothing, so no candidates could be mined.
    NoFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reformulation {
    pub query: String,
    pub initial: Vec<String>,
    pub feedback: Vec<String>,
    pub mode: SelectionMode,
    pub kind: Option<CandidateKind>,
    pub final_terms: Vec<String>,
    pub candidates: Vec<AuditCandidate>,
    pub warnings: Vec<String>,
}

impl Reformulation {
    pub fn candidate(&self, kind: CandidateKind) -> Option<&AuditCandidate> {
        self.candidates.iter().find(|c| c.kind == kind)
    }

    /// Candidates in the form consumed by [`select_best`], for replaying the
    /// recorded choice.
    pub fn audit_candidates(&self) -> Vec<Candidate> {
        self.candidates
            .iter()
            .map(AuditCandidate::to_candidate)
            .collect()
    }
}

/// The three signature candidates plus the baseline, each with its quality
/// vector.
pub fn build_candidates(
    engine: &Engine,
    query: &PreparedQuery,
    feedback: &[DocIdx],
    config: &PipelineConfig,
) -> Result<Vec<AuditCandidate>> {
    let mut out = Vec::with_capacity(4);
    for kind in SigKind::ALL {
        let tokens = engine.signature_tokens(feedback, kind);
        let qr = get_qr_candidate(
            &tokens,
            engine.preprocessor(),
            &config.rank,
            config.reformulation_size,
            &query.terms,
        );
        let terms = combine(&query.terms, &qr.term_strings());
        out.push(AuditCandidate {
            kind: kind.into(),
            features: compute_quality_metrics(&terms, engine.index())?,
            expansion: qr.terms,
            terms,
            probability: None,
        });
    }
    out.push(AuditCandidate {
        kind: CandidateKind::Baseline,
        expansion: Vec::new(),
        terms: query.terms.clone(),
        features: compute_quality_metrics(&query.terms, engine.index())?,
        probability: None,
    });
    Ok(out)
}

pub fn reformulate(
    engine: &Engine,
    text: &str,
    config: &PipelineConfig,
    ensemble: Option<&Ensemble>,
) -> Result<Reformulation> {
    let query = engine.prepare(text)?;
    reformulate_prepared(engine, &query, config, ensemble)
}

pub fn reformulate_prepared(
    engine: &Engine,
    query: &PreparedQuery,
    config: &PipelineConfig,
    ensemble: Option<&Ensemble>,
) -> Result<Reformulation> {
    let feedback = engine.feedback(query, config.feedback_size);
    let mut candidates = build_candidates(engine, query, &feedback, config)?;
    let mut warnings = Vec::new();

    let (mode, kind, final_terms) = if feedback.is_empty() {
        let msg = format!(
            "query `{}` retrieved nothing; repeating its terms",
            query.text
        );
        warn!("{msg}");
        warnings.push(msg);
        (
            SelectionMode::NoFeedback,
            Some(CandidateKind::Baseline),
            repeat_terms(&query.terms),
        )
    } else if let Some(ensemble) = ensemble {
        let audit: Vec<Candidate> = candidates
            .iter()
            .map(AuditCandidate::to_candidate)
            .collect();
        let selection = select_best(&audit, ensemble).expect("four candidates");
        for (c, p) in candidates.iter_mut().zip(&selection.probabilities) {
            c.probability = Some(*p);
        }
        (SelectionMode::Model, Some(selection.kind), selection.terms)
    } else {
        (SelectionMode::PassThrough, None, query.terms.clone())
    };

    Ok(Reformulation {
        query: query.text.clone(),
        initial: query.terms.clone(),
        feedback: feedback
            .iter()
            .map(|&d| engine.index().doc_id(d).to_string())
            .collect(),
        mode,
        kind,
        final_terms,
        candidates,
        warnings,
    })
}
