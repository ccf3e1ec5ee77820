//! Comparison reformulators and the technique registry used by evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    combine, get_qr_candidate, reformulate_prepared, Engine, PipelineConfig, PreparedQuery,
    Reformulation,
};
use crate::error::{Error, Result};
use crate::extract::SigKind;
use crate::index::DocIdx;
use crate::learner::Ensemble;

/// Where term frequencies are collected from in the feedback documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    /// All split terms of the documents.
    All,
    /// Terms of structured signature tokens of one context.
    Sig(SigKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Summed term frequency.
    Tf,
    /// Summed `tf * idf`.
    TfIdf,
    /// Centroid of the unit-length document vectors (beta = 1).
    Rocchio,
    /// Robertson selection value with add-0.5 smoothing.
    Rsv,
}

fn signature_counts(engine: &Engine, feedback: &[DocIdx], kind: SigKind) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for token in engine.signature_tokens(feedback, kind).token_strs() {
        for term in engine.preprocessor().token_terms(token) {
            *counts.entry(term).or_insert(0) += 1;
        }
    }
    counts
}

fn document_counts(engine: &Engine, feedback: &[DocIdx]) -> BTreeMap<String, u64> {
    let index = engine.index();
    let mut counts = BTreeMap::new();
    for &d in feedback {
        for &(t, tf) in index.doc_terms(d) {
            if index.is_split_term(t) {
                *counts.entry(index.term(t).to_string()).or_insert(0) += u64::from(tf);
            }
        }
    }
    counts
}

fn scores(
    engine: &Engine,
    feedback: &[DocIdx],
    method: Method,
    scope: Scope,
) -> BTreeMap<String, f64> {
    let index = engine.index();
    let counts = || match scope {
        Scope::All => document_counts(engine, feedback),
        Scope::Sig(kind) => signature_counts(engine, feedback, kind),
    };
    match method {
        Method::Tf => counts().into_iter().map(|(t, c)| (t, c as f64)).collect(),
        Method::TfIdf => counts()
            .into_iter()
            .map(|(t, c)| {
                let idf = index.term_stats(&t).idf;
                (t, c as f64 * idf)
            })
            .collect(),
        Method::Rocchio => {
            let mut centroid: BTreeMap<String, f64> = BTreeMap::new();
            let size = feedback.len() as f64;
            for &d in feedback {
                for (t, w) in index.unit_vector(d) {
                    if index.is_split_term(t) {
                        *centroid.entry(index.term(t).to_string()).or_insert(0.0) += w / size;
                    }
                }
            }
            centroid
        }
        Method::Rsv => {
            let n_docs = index.doc_count() as f64;
            let r_docs = feedback.len() as f64;
            let mut relevant: BTreeMap<String, u64> = BTreeMap::new();
            for &d in feedback {
                for &(t, _) in index.doc_terms(d) {
                    if index.is_split_term(t) {
                        *relevant.entry(index.term(t).to_string()).or_insert(0) += 1;
                    }
                }
            }
            relevant
                .into_iter()
                .map(|(t, r)| {
                    let r = r as f64;
                    let n = index.term_stats(&t).df as f64;
                    let w = (((r + 0.5) * (n_docs - n - r_docs + r + 0.5))
                        / ((n - r + 0.5) * (r_docs - r + 0.5)))
                        .ln();
                    (t, w * (r / r_docs - n / n_docs))
                })
                .collect()
        }
    }
}

/// Top-`k` expansion terms with positive weight, excluding `exclude`.
/// Ties break alphabetically.
pub fn baseline_terms(
    engine: &Engine,
    feedback: &[DocIdx],
    method: Method,
    scope: Scope,
    k: usize,
    exclude: &[String],
) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = scores(engine, feedback, method, scope)
        .into_iter()
        .filter(|(t, s)| *s > 0.0 && !exclude.contains(t))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technique {
    /// The initial query as is.
    Baseline,
    /// CodeRank candidates chosen by the trained model.
    Acer,
    /// One CodeRank candidate, always.
    Candidate(SigKind),
    Weighted(Method, Scope),
}

const REGISTRY: &[(&str, Technique)] = &[
    ("baseline", Technique::Baseline),
    ("acer", Technique::Acer),
    ("msig", Technique::Candidate(SigKind::Msig)),
    ("fsig", Technique::Candidate(SigKind::Fsig)),
    ("comb", Technique::Candidate(SigKind::Comb)),
    ("tf", Technique::Weighted(Method::Tf, Scope::All)),
    (
        "tf_msig",
        Technique::Weighted(Method::Tf, Scope::Sig(SigKind::Msig)),
    ),
    (
        "tf_fsig",
        Technique::Weighted(Method::Tf, Scope::Sig(SigKind::Fsig)),
    ),
    (
        "tf_comb",
        Technique::Weighted(Method::Tf, Scope::Sig(SigKind::Comb)),
    ),
    ("tfidf", Technique::Weighted(Method::TfIdf, Scope::All)),
    (
        "tfidf_msig",
        Technique::Weighted(Method::TfIdf, Scope::Sig(SigKind::Msig)),
    ),
    (
        "tfidf_fsig",
        Technique::Weighted(Method::TfIdf, Scope::Sig(SigKind::Fsig)),
    ),
    (
        "tfidf_comb",
        Technique::Weighted(Method::TfIdf, Scope::Sig(SigKind::Comb)),
    ),
    ("rocchio", Technique::Weighted(Method::Rocchio, Scope::All)),
    ("rsv", Technique::Weighted(Method::Rsv, Scope::All)),
];

impl Technique {
    pub fn all() -> impl Iterator<Item = Technique> {
        REGISTRY.iter().map(|&(_, t)| t)
    }

    pub fn names() -> Vec<&'static str> {
        REGISTRY.iter().map(|&(n, _)| n).collect()
    }

    pub fn name(self) -> &'static str {
        REGISTRY
            .iter()
            .find(|&&(_, t)| t == self)
            .map(|&(n, _)| n)
            .expect("every technique is registered")
    }

    pub fn needs_model(self) -> bool {
        self == Technique::Acer
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        REGISTRY
            .iter()
            .find(|&&(n, _)| n == s)
            .map(|&(_, t)| t)
            .ok_or_else(|| Error::UnknownTechnique {
                name: s.to_string(),
                valid: Technique::names().join(", "),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueRun {
    pub technique: Technique,
    /// The query body to execute (identifiers of the original text are
    /// added at execution time).
    pub terms: Vec<String>,
    pub reformulation: Option<Reformulation>,
}

pub fn run_technique(
    engine: &Engine,
    query: &PreparedQuery,
    technique: Technique,
    config: &PipelineConfig,
    ensemble: Option<&Ensemble>,
) -> Result<TechniqueRun> {
    let plain = |terms| TechniqueRun {
        technique,
        terms,
        reformulation: None,
    };
    Ok(match technique {
        Technique::Baseline => plain(query.terms.clone()),
        Technique::Acer => {
            let ensemble = ensemble
                .ok_or_else(|| Error::Config("technique `acer` needs a trained model".into()))?;
            let r = reformulate_prepared(engine, query, config, Some(ensemble))?;
            TechniqueRun {
                technique,
                terms: r.final_terms.clone(),
                reformulation: Some(r),
            }
        }
        Technique::Candidate(kind) => {
            let feedback = engine.feedback(query, config.feedback_size);
            let tokens = engine.signature_tokens(&feedback, kind);
            let qr = get_qr_candidate(
                &tokens,
                engine.preprocessor(),
                &config.rank,
                config.reformulation_size,
                &query.terms,
            );
            plain(combine(&query.terms, &qr.term_strings()))
        }
        Technique::Weighted(method, scope) => {
            let feedback = engine.feedback(query, config.feedback_size);
            let terms: Vec<String> = baseline_terms(
                engine,
                &feedback,
                method,
                scope,
                config.reformulation_size,
                &query.terms,
            )
            .into_iter()
            .map(|(t, _)| t)
            .collect();
            plain(combine(&query.terms, &terms))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, PreprocessOptions, Preprocessor};

    fn engine(docs: &[(&str, &str)]) -> Engine {
        let c = Corpus::from_texts(
            Preprocessor::new(PreprocessOptions::default()),
            docs.iter().map(|&(a, b)| (a, b)),
        );
        Engine::build(&c).unwrap()
    }

    fn three() -> Engine {
        engine(&[
            ("a", "launch launch launch debug target common"),
            ("b", "launch debug common"),
            ("c", "zebra common"),
        ])
    }

    fn idx(e: &Engine, ids: &[&str]) -> Vec<DocIdx> {
        ids.iter()
            .map(|id| e.index().doc_index(id).unwrap())
            .collect()
    }

    fn names(v: Vec<(String, f64)>) -> Vec<String> {
        v.into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn single_doc_tf_follows_frequency() {
        let e = three();
        let got = baseline_terms(&e, &idx(&e, &["a"]), Method::Tf, Scope::All, 10, &[]);
        assert_eq!(names(got), ["launch", "common", "debug", "target"]);
    }

    #[test]
    fn ubiquitous_terms_never_selected_by_tfidf() {
        let e = three();
        let got = baseline_terms(
            &e,
            &idx(&e, &["a", "b"]),
            Method::TfIdf,
            Scope::All,
            10,
            &[],
        );
        assert!(!names(got).contains(&"common".to_string()));
    }

    #[test]
    fn rsv_matches_hand_computation() {
        let e = three();
        let fb = idx(&e, &["a", "b"]);
        // N=3, R=2. launch/debug: r=2, n=2; target: r=1, n=1; common: r=2, n=3
        let w = |r: f64, n: f64| {
            let (big_n, big_r) = (3.0_f64, 2.0_f64);
            (((r + 0.5) * (big_n - n - big_r + r + 0.5)) / ((n - r + 0.5) * (big_r - r + 0.5))).ln()
                * (r / big_r - n / big_n)
        };
        let expected_launch = w(2.0, 2.0);
        let expected_target = w(1.0, 1.0);
        assert!(w(2.0, 3.0) <= 0.0);
        let got = baseline_terms(&e, &fb, Method::Rsv, Scope::All, 10, &[]);
        assert_eq!(names(got.clone()), ["debug", "launch", "target"]);
        assert!((got[0].1 - expected_launch).abs() < 1e-12);
        assert!((got[2].1 - expected_target).abs() < 1e-12);
    }

    #[test]
    fn rocchio_is_centroid_of_unit_vectors() {
        let e = three();
        let fb = idx(&e, &["a", "b"]);
        let got = baseline_terms(&e, &fb, Method::Rocchio, Scope::All, 10, &[]);
        let index = e.index();
        let launch = index.term_id("launch").unwrap();
        let expected: f64 = fb
            .iter()
            .map(|&d| {
                index
                    .unit_vector(d)
                    .into_iter()
                    .find(|&(t, _)| t == launch)
                    .map_or(0.0, |(_, w)| w)
            })
            .sum::<f64>()
            / 2.0;
        let (_, w) = got.iter().find(|(t, _)| t == "launch").unwrap();
        assert!((w - expected).abs() < 1e-12);
    }

    #[test]
    fn signature_scope_uses_declarations_only() {
        let e = engine(&[(
            "X.java",
            "class X { void openLaunchView() { int bodyDecoy = 0; } }",
        )]);
        let fb = idx(&e, &["X.java"]);
        let sig = names(baseline_terms(
            &e,
            &fb,
            Method::Tf,
            Scope::Sig(SigKind::Msig),
            10,
            &[],
        ));
        let all = names(baseline_terms(&e, &fb, Method::Tf, Scope::All, 10, &[]));
        assert!(sig.contains(&"launch".to_string()));
        assert!(!sig.contains(&"decoy".to_string()));
        assert!(all.contains(&"decoy".to_string()));
    }

    #[test]
    fn registry_round_trips() {
        for t in Technique::all() {
            assert_eq!(t.name().parse::<Technique>().unwrap(), t);
        }
        let err = "bogus".parse::<Technique>().unwrap_err();
        assert!(err.to_string().contains("rocchio"));
    }
}
