//! Vector-space retrieval over the preprocessed corpus.
//!
//! Document weights are `(1 + ln tf) * idf` with cosine normalisation, query
//! weights are `tf * idf`, and `idf = ln(N / df)`. Results are ordered by
//! descending cosine score with ascending document id breaking ties.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SourceDocument;
use crate::error::{Error, Result};

pub type TermId = u32;
pub type DocIdx = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermStats {
    pub df: usize,
    pub idf: f64,
    pub ctf: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub doc: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedResults {
    pub hits: Vec<Hit>,
}

impl RankedResults {
    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.doc.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Compact persisted form; postings, idf and norms are derived on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexData {
    pub terms: Vec<String>,
    pub split_terms: Vec<bool>,
    pub doc_ids: Vec<String>,
    pub doc_vectors: Vec<Vec<(TermId, u32)>>,
}

#[derive(Debug, Clone)]
pub struct Index {
    terms: Vec<String>,
    term_ids: HashMap<String, TermId>,
    split_terms: Vec<bool>,
    doc_ids: Vec<String>,
    doc_vectors: Vec<Vec<(TermId, u32)>>,
    postings: Vec<Vec<(DocIdx, u32)>>,
    idf: Vec<f64>,
    ctf: Vec<u64>,
    doc_norms: Vec<f64>,
    total_terms: u64,
}

/// Per-document input to [`Index::build_from_terms`]: id, split body terms and
/// extra (original structured) tokens.
pub struct DocTerms<'a> {
    pub id: &'a str,
    pub body: &'a [String],
    pub extra: &'a [String],
}

impl Index {
    pub fn build(documents: &[SourceDocument]) -> Result<Self> {
        Self::build_from_terms(
            documents
                .iter()
                .map(|d| DocTerms {
                    id: &d.id,
                    body: &d.body_terms,
                    extra: &d.original_tokens,
                })
                .collect(),
        )
    }

    /// Builds from plain `(id, terms)` lists; every term counts as a split term.
    pub fn from_term_lists<S: AsRef<str>>(docs: &[(S, Vec<String>)]) -> Result<Self> {
        Self::build_from_terms(
            docs.iter()
                .map(|(id, terms)| DocTerms {
                    id: id.as_ref(),
                    body: terms,
                    extra: &[],
                })
                .collect(),
        )
    }

    pub fn build_from_terms(mut docs: Vec<DocTerms<'_>>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        docs.sort_by(|a, b| a.id.cmp(b.id));
        docs.dedup_by(|a, b| a.id == b.id);

        let counts: Vec<BTreeMap<&str, u32>> = docs
            .par_iter()
            .map(|d| {
                let mut counts = BTreeMap::new();
                for t in d.body.iter().chain(d.extra) {
                    *counts.entry(t.as_str()).or_insert(0) += 1;
                }
                counts
            })
            .collect();

        let mut vocab: BTreeMap<&str, bool> = BTreeMap::new();
        for d in &docs {
            for t in d.body {
                vocab.insert(t, true);
            }
            for t in d.extra {
                vocab.entry(t).or_insert(false);
            }
        }
        let terms: Vec<String> = vocab.keys().map(|t| t.to_string()).collect();
        let split_terms: Vec<bool> = vocab.values().copied().collect();
        let term_ids: HashMap<&str, TermId> = vocab
            .keys()
            .enumerate()
            .map(|(i, t)| (*t, i as TermId))
            .collect();

        let doc_vectors = counts
            .into_iter()
            .map(|c| c.into_iter().map(|(t, tf)| (term_ids[t], tf)).collect())
            .collect();

        Self::from_data(IndexData {
            terms,
            split_terms,
            doc_ids: docs.iter().map(|d| d.id.to_string()).collect(),
            doc_vectors,
        })
    }

    pub fn from_data(data: IndexData) -> Result<Self> {
        let IndexData {
            terms,
            split_terms,
            doc_ids,
            doc_vectors,
        } = data;
        let bad = |reason: &str| Error::format("index", reason);
        if doc_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if split_terms.len() != terms.len() || doc_vectors.len() != doc_ids.len() {
            return Err(bad("length mismatch"));
        }
        if !terms.windows(2).all(|w| w[0] < w[1]) || !doc_ids.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("terms and documents must be strictly sorted"));
        }

        let n_terms = terms.len();
        let mut postings: Vec<Vec<(DocIdx, u32)>> = vec![Vec::new(); n_terms];
        let mut ctf = vec![0u64; n_terms];
        for (d, vector) in doc_vectors.iter().enumerate() {
            if !vector.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(bad("document vector not sorted by term"));
            }
            for &(t, tf) in vector {
                if t as usize >= n_terms || tf == 0 {
                    return Err(bad("document vector entry out of range"));
                }
                postings[t as usize].push((d as DocIdx, tf));
                ctf[t as usize] += u64::from(tf);
            }
        }
        let n = doc_ids.len() as f64;
        let idf: Vec<f64> = postings
            .iter()
            .map(|p| {
                if p.is_empty() {
                    (n + 1.0).ln()
                } else {
                    (n / p.len() as f64).ln()
                }
            })
            .collect();
        let doc_norms = doc_vectors
            .iter()
            .map(|v| {
                v.iter()
                    .map(|&(t, tf)| {
                        let w = tf_weight(tf) * idf[t as usize];
                        w * w
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let total_terms = ctf.iter().sum();
        let term_ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();

        Ok(Self {
            terms,
            term_ids,
            split_terms,
            doc_ids,
            doc_vectors,
            postings,
            idf,
            ctf,
            doc_norms,
            total_terms,
        })
    }

    pub fn to_data(&self) -> IndexData {
        IndexData {
            terms: self.terms.clone(),
            split_terms: self.split_terms.clone(),
            doc_ids: self.doc_ids.clone(),
            doc_vectors: self.doc_vectors.clone(),
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    pub fn term_id(&self, term: &str) -> Option<TermId> {
        self.term_ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id as usize]
    }

    /// True for terms produced by identifier splitting, false for terms that
    /// only occur as original structured tokens.
    pub fn is_split_term(&self, id: TermId) -> bool {
        self.split_terms[id as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_id(&self, doc: DocIdx) -> &str {
        &self.doc_ids[doc as usize]
    }

    pub fn doc_index(&self, id: &str) -> Option<DocIdx> {
        self.doc_ids
            .binary_search_by(|d| d.as_str().cmp(id))
            .ok()
            .map(|i| i as DocIdx)
    }

    pub fn doc_norm(&self, doc: DocIdx) -> f64 {
        self.doc_norms[doc as usize]
    }

    /// `(term, tf)` pairs of a document, ordered by term id.
    pub fn doc_terms(&self, doc: DocIdx) -> &[(TermId, u32)] {
        &self.doc_vectors[doc as usize]
    }

    pub fn postings(&self, term: TermId) -> &[(DocIdx, u32)] {
        &self.postings[term as usize]
    }

    pub fn idf_of(&self, term: TermId) -> f64 {
        self.idf[term as usize]
    }

    /// TF-IDF weight of `term` in `doc` before normalisation.
    pub fn weight(&self, term: TermId, tf: u32) -> f64 {
        tf_weight(tf) * self.idf[term as usize]
    }

    /// Cosine-normalised document vector, ordered by term id. Empty when the
    /// document has zero norm.
    pub fn unit_vector(&self, doc: DocIdx) -> Vec<(TermId, f64)> {
        let norm = self.doc_norms[doc as usize];
        if norm <= 0.0 {
            return Vec::new();
        }
        self.doc_vectors[doc as usize]
            .iter()
            .map(|&(t, tf)| (t, self.weight(t, tf) / norm))
            .collect()
    }

    pub fn cosine(&self, a: DocIdx, b: DocIdx) -> f64 {
        let (va, vb) = (self.unit_vector(a), self.unit_vector(b));
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < va.len() && j < vb.len() {
            match va[i].0.cmp(&vb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += va[i].1 * vb[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot
    }

    /// idf is `ln(N / df)`, or `ln(N + 1)` for unseen terms.
    pub fn term_stats(&self, term: &str) -> TermStats {
        match self.term_id(term) {
            Some(id) => TermStats {
                df: self.postings[id as usize].len(),
                idf: self.idf[id as usize],
                ctf: self.ctf[id as usize],
            },
            None => TermStats {
                df: 0,
                idf: (self.doc_count() as f64 + 1.0).ln(),
                ctf: 0,
            },
        }
    }

    /// Number of documents containing both terms.
    pub fn co_doc_frequency(&self, a: &str, b: &str) -> usize {
        let (Some(a), Some(b)) = (self.term_id(a), self.term_id(b)) else {
            return 0;
        };
        let (pa, pb) = (self.postings(a), self.postings(b));
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].0.cmp(&pb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Documents containing at least one of the given terms.
    pub fn docs_matching_any<'a>(&self, terms: impl IntoIterator<Item = &'a str>) -> usize {
        let mut docs = BTreeSet::new();
        for t in terms {
            if let Some(id) = self.term_id(t) {
                docs.extend(self.postings(id).iter().map(|&(d, _)| d));
            }
        }
        docs.len()
    }

    /// Unnormalised query-document dot products, keyed by document.
    pub fn dot_products(&self, query_terms: &[String]) -> BTreeMap<DocIdx, f64> {
        let query = self.query_vector(query_terms);
        let mut acc = BTreeMap::new();
        for (t, qw) in query {
            for &(d, tf) in self.postings(t) {
                *acc.entry(d).or_insert(0.0) += qw * self.weight(t, tf);
            }
        }
        acc
    }

    fn query_vector(&self, query_terms: &[String]) -> Vec<(TermId, f64)> {
        let mut tf: BTreeMap<TermId, u32> = BTreeMap::new();
        for t in query_terms {
            if let Some(id) = self.term_id(t) {
                *tf.entry(id).or_insert(0) += 1;
            }
        }
        tf.into_iter()
            .map(|(t, n)| (t, f64::from(n) * self.idf[t as usize]))
            .collect()
    }

    /// Top-`k` documents by cosine similarity; zero-score documents are omitted.
    pub fn search(&self, query_terms: &[String], k: usize) -> RankedResults {
        let query = self.query_vector(query_terms);
        let qnorm = query.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if qnorm <= 0.0 || k == 0 {
            return RankedResults::default();
        }
        let mut acc: HashMap<DocIdx, f64> = HashMap::new();
        for &(t, qw) in &query {
            for &(d, tf) in self.postings(t) {
                *acc.entry(d).or_insert(0.0) += qw * self.weight(t, tf);
            }
        }
        let mut scored: Vec<(DocIdx, f64)> = acc
            .into_iter()
            .filter_map(|(d, dot)| {
                let dnorm = self.doc_norms[d as usize];
                let score = dot / (qnorm * dnorm);
                (dnorm > 0.0 && score > 0.0).then_some((d, score))
            })
            .collect();
        // doc indices follow id order, so index order is id order
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        RankedResults {
            hits: scored
                .into_iter()
                .map(|(d, score)| Hit {
                    doc: self.doc_ids[d as usize].clone(),
                    score,
                })
                .collect(),
        }
    }
}

fn tf_weight(tf: u32) -> f64 {
    if tf == 0 {
        0.0
    } else {
        1.0 + f64::from(tf).ln()
    }
}
