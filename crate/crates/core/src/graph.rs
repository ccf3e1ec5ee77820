//! Term co-occurrence graphs and CodeRank term weighting.
//!
//! Each structured token contributes its split terms as vertices and links
//! terms that sit next to each other in the token (window of two). Edges are
//! bidirectional and unweighted. Scores follow the PageRank recurrence
//!
//! ```text
//! S(v) = (1 - d) + d * sum_{u in In(v)} S(u) / |Out(u)|
//! ```
//!
//! evaluated with synchronous (Jacobi) sweeps from a uniform start. The
//! recurrence is a `d`-contraction on scores divided by degree, so iteration
//! stops when `max(change / degree) * max_degree * d / (1 - d)`, a bound on
//! the remaining error of every score, drops below the tolerance.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Preprocessor;
use crate::extract::SignatureTokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankParams {
    pub damping: f64,
    pub base_score: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub window: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            damping: 0.85,
            base_score: 0.25,
            tolerance: 1e-4,
            max_iterations: 100,
            window: 2,
        }
    }
}

/// Undirected term graph stored as symmetric adjacency over sorted terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermGraph {
    terms: Vec<String>,
    adjacency: Vec<Vec<usize>>,
}

impl TermGraph {
    /// Builds a graph from term sequences, linking terms less than `window`
    /// positions apart within the same sequence.
    pub fn from_sequences<I, S>(sequences: I, window: usize) -> Self
    where
        I: IntoIterator<Item = Vec<S>>,
        S: AsRef<str>,
    {
        let mut vertices: BTreeSet<String> = BTreeSet::new();
        let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
        for seq in sequences {
            for (i, a) in seq.iter().enumerate() {
                let a = a.as_ref();
                vertices.insert(a.to_string());
                for b in seq.iter().skip(i + 1).take(window.saturating_sub(1)) {
                    let b = b.as_ref();
                    if a != b {
                        let (x, y) = if a < b { (a, b) } else { (b, a) };
                        edges.insert((x.to_string(), y.to_string()));
                    }
                }
            }
        }
        Self::from_parts(vertices, edges)
    }

    /// Builds a graph from explicit vertices and undirected edges.
    pub fn from_edges<'a>(
        vertices: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        let mut vs: BTreeSet<String> = vertices.into_iter().map(String::from).collect();
        let mut es = BTreeSet::new();
        for (a, b) in edges {
            vs.insert(a.to_string());
            vs.insert(b.to_string());
            if a != b {
                let (x, y) = if a < b { (a, b) } else { (b, a) };
                es.insert((x.to_string(), y.to_string()));
            }
        }
        Self::from_parts(vs, es)
    }

    fn from_parts(vertices: BTreeSet<String>, edges: BTreeSet<(String, String)>) -> Self {
        let terms: Vec<String> = vertices.into_iter().collect();
        let index: BTreeMap<&str, usize> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let mut adjacency = vec![Vec::new(); terms.len()];
        for (a, b) in &edges {
            let (ia, ib) = (index[a.as_str()], index[b.as_str()]);
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { terms, adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        self.terms.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    fn position(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.position(term).is_some()
    }

    /// Neighbours of `term`; incoming and outgoing sets coincide.
    pub fn neighbors(&self, term: &str) -> Vec<&str> {
        self.position(term)
            .map(|i| {
                self.adjacency[i]
                    .iter()
                    .map(|&j| self.terms[j].as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.position(a), self.position(b)) {
            (Some(i), Some(j)) => self.adjacency[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// JSON dump of vertices (with scores when given) and edges.
    pub fn dump(&self, scores: Option<&CodeRankScores>) -> String {
        #[derive(Serialize)]
        struct Vertex<'a> {
            term: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            score: Option<f64>,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            vertices: Vec<Vertex<'a>>,
            edges: Vec<(&'a str, &'a str)>,
        }
        let vertices = self
            .terms
            .iter()
            .map(|t| Vertex {
                term: t,
                score: scores.and_then(|s| s.scores.get(t).copied()),
            })
            .collect();
        let edges = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| {
                list.iter()
                    .filter(move |&&j| j > i)
                    .map(move |&j| (self.terms[i].as_str(), self.terms[j].as_str()))
            })
            .collect();
        serde_json::to_string_pretty(&Dump { vertices, edges }).expect("graph dump serializes")
    }
}

/// Splits every candidate token into valid terms and links adjacent terms.
/// Edges never cross token boundaries.
pub fn build_term_graph(
    tokens: &SignatureTokens,
    preprocessor: &Preprocessor,
    window: usize,
) -> TermGraph {
    TermGraph::from_sequences(
        tokens.token_strs().map(|t| preprocessor.token_terms(t)),
        window,
    )
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodeRankScores {
    pub scores: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn code_rank(graph: &TermGraph, params: &RankParams) -> CodeRankScores {
    let n = graph.vertex_count();
    let teleport = 1.0 - params.damping;
    let mut current = vec![params.base_score; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = n == 0;
    let max_degree = graph
        .adjacency
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    while !converged && iterations < params.max_iterations {
        for (i, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = graph.adjacency[i]
                .iter()
                .map(|&j| current[j] / graph.adjacency[j].len() as f64)
                .sum();
            *slot = teleport + params.damping * inflow;
        }
        // scores divided by degree contract by the damping factor in the max
        // norm, which bounds the distance to the fixed point, not just the
        // last step
        let delta = current
            .iter()
            .zip(&next)
            .zip(&graph.adjacency)
            .map(|((a, b), adj)| (a - b).abs() / adj.len().max(1) as f64)
            .fold(0.0, f64::max);
        std::mem::swap(&mut current, &mut next);
        iterations += 1;
        let remaining = if delta == 0.0 {
            0.0
        } else {
            delta * max_degree * params.damping / (1.0 - params.damping)
        };
        converged = remaining < params.tolerance;
    }

    CodeRankScores {
        scores: graph.terms.iter().cloned().zip(current).collect(),
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTerm {
    pub term: String,
    /// Min-max normalised score in `[0, 1]`.
    pub score: f64,
}

/// Ranking key that treats scores equal to 1e-9 as ties, so floating noise
/// between symmetric vertices falls back to the lexicographic order.
fn rank_key(score: f64) -> i64 {
    (score * 1e9).round() as i64
}

/// All terms ordered by descending score with lexicographic tie-break, scores
/// min-max normalised (all 1.0 when every score is equal).
pub fn ranked_terms(scores: &CodeRankScores) -> Vec<RankedTerm> {
    let (min, max) = scores
        .scores
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let range = max - min;
    let mut ranked: Vec<(&String, f64)> = scores.scores.iter().map(|(t, &s)| (t, s)).collect();
    ranked.sort_by(|a, b| rank_key(b.1).cmp(&rank_key(a.1)).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .map(|(term, s)| RankedTerm {
            term: term.clone(),
            score: if range > 0.0 { (s - min) / range } else { 1.0 },
        })
        .collect()
}

pub fn top_k_terms(scores: &CodeRankScores, k: usize) -> Vec<RankedTerm> {
    let mut ranked = ranked_terms(scores);
    ranked.truncate(k);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Splitter;
    use crate::extract::{CandidateToken, SigKind};
    use approx::assert_abs_diff_eq;

    fn tokens(list: &[&str]) -> SignatureTokens {
        SignatureTokens {
            kind: SigKind::Msig,
            tokens: list
                .iter()
                .enumerate()
                .map(|(i, t)| CandidateToken {
                    token: t.to_string(),
                    doc: "d".into(),
                    offset: i,
                })
                .collect(),
        }
    }

    #[test]
    fn chat_room_edges() {
        let g = build_term_graph(&tokens(&["getChatRoomBots"]), &Preprocessor::default(), 2);
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 3);
        assert!(g.has_edge("get", "chat"));
        assert!(g.has_edge("chat", "room"));
        assert!(g.has_edge("room", "bots"));
        assert!(!g.has_edge("get", "room"));
        assert!(Splitter::default().is_structured("getChatRoomBots"));
    }

    #[test]
    fn shared_term_is_one_vertex() {
        let g = build_term_graph(
            &tokens(&["resolveRuntimeClasspathEntry", "classpathProvider"]),
            &Preprocessor::default(),
            2,
        );
        assert_eq!(g.neighbors("classpath"), ["entry", "provider", "runtime"]);
        // no edge across token boundaries
        assert_eq!(g.neighbors("entry"), ["classpath"]);
        assert!(!g.has_edge("entry", "provider"));
    }

    #[test]
    fn duplicate_edges_collapse_and_isolated_vertices() {
        let g = build_term_graph(
            &tokens(&["chatRoom", "chatRoom", "isOpen"]),
            &Preprocessor::default(),
            2,
        );
        assert_eq!(g.edge_count(), 1);
        // "is" is too short, leaving "open" isolated
        assert!(g.contains("open"));
        assert!(g.neighbors("open").is_empty());
        assert!(build_term_graph(&tokens(&[]), &Preprocessor::default(), 2).is_empty());
    }

    #[test]
    fn isolated_vertex_score() {
        let g = TermGraph::from_edges(["solo"], []);
        let params = RankParams::default();
        let s = code_rank(&g, &params);
        assert_eq!(s.scores["solo"], 1.0 - params.damping);
        assert_abs_diff_eq!(s.scores["solo"], 0.15, epsilon = 1e-15);
        assert!(s.converged);
    }

    #[test]
    fn mutual_pair_converges_to_one() {
        let g = TermGraph::from_edges([], [("a", "b")]);
        let s = code_rank(&g, &RankParams::default());
        assert!(s.converged);
        assert_abs_diff_eq!(s.scores["a"], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(s.scores["b"], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn path_of_three() {
        // b = 0.15 + 1.7a and a = 0.15 + 0.425b
        let a_exact = 0.15 * (1.0 + 0.425) / (1.0 - 0.425 * 1.7);
        let b_exact = 0.15 + 1.7 * a_exact;
        assert_abs_diff_eq!(a_exact, 0.7703, epsilon = 1e-4);
        assert_abs_diff_eq!(b_exact, 1.4595, epsilon = 1e-4);

        let g = TermGraph::from_edges([], [("a", "b"), ("b", "c")]);
        let s = code_rank(&g, &RankParams::default());
        assert!(s.converged);
        assert_abs_diff_eq!(s.scores["a"], a_exact, epsilon = 1e-3);
        assert_abs_diff_eq!(s.scores["c"], a_exact, epsilon = 1e-3);
        assert_abs_diff_eq!(s.scores["b"], b_exact, epsilon = 1e-3);
        assert_eq!(top_k_terms(&s, 1)[0].term, "b");
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let g = TermGraph::from_edges([], [("a", "b"), ("b", "c")]);
        let params = RankParams {
            max_iterations: 2,
            ..Default::default()
        };
        let s = code_rank(&g, &params);
        assert_eq!(s.iterations, 2);
        assert!(!s.converged);
    }

    #[test]
    fn top_k_sorting_and_normalisation() {
        let scores = CodeRankScores {
            scores: [
                ("classpath", 1.8),
                ("resolve", 1.2),
                ("launch", 1.1),
                ("java", 0.4),
            ]
            .into_iter()
            .map(|(t, s)| (t.to_string(), s))
            .collect(),
            iterations: 1,
            converged: true,
        };
        let top = top_k_terms(&scores, 2);
        assert_eq!(top[0].term, "classpath");
        assert_eq!(top[1].term, "resolve");
        assert_eq!(top[0].score, 1.0);
        assert_abs_diff_eq!(top[1].score, 0.8 / 1.4, epsilon = 1e-12);
        let all = top_k_terms(&scores, 10);
        assert_eq!(all.len(), 4);
        assert_eq!(all[3].score, 0.0);
    }

    #[test]
    fn ties_are_lexicographic() {
        let g = TermGraph::from_edges([], [("zeta", "alpha")]);
        let s = code_rank(&g, &RankParams::default());
        let terms: Vec<_> = ranked_terms(&s).into_iter().map(|r| r.term).collect();
        assert_eq!(terms, ["alpha", "zeta"]);
    }

    #[test]
    fn dump_lists_edges_once() {
        let g = TermGraph::from_edges([], [("a", "b"), ("b", "c")]);
        let s = code_rank(&g, &RankParams::default());
        let v: serde_json::Value = serde_json::from_str(&g.dump(Some(&s))).unwrap();
        assert_eq!(v["edges"].as_array().unwrap().len(), 2);
        assert!(v["vertices"][1]["score"].as_f64().unwrap() > 1.0);
    }
}
