//! Outcome and retrieval tables, per system and over all queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{classify_outcome, quantile, retrieval_metrics, Outcome, RetrievalMetrics};
use super::QueryRun;
use crate::error::{Error, Result};
use crate::pipeline::Technique;

pub const REPORT_FORMAT: &str = "qreform-report 1";
/// Group name for the aggregate over every system.
pub const ALL_SYSTEMS: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub mean: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl RankStats {
    fn of(ranks: &[usize]) -> Option<Self> {
        if ranks.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
        v.sort_by(f64::total_cmp);
        Some(RankStats {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q1: quantile(&v, 0.25),
            q2: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub count: usize,
    /// Share of the resolved queries (improved + worsened + preserved).
    pub percent: f64,
    /// Statistics of the reformulated ranks present in this class.
    pub ranks: Option<RankStats>,
    /// Mean of reformulated minus baseline rank over pairs with both ranks.
    pub mrd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub total: usize,
    pub improved: ClassStats,
    pub worsened: ClassStats,
    pub preserved: ClassStats,
    /// Neither query retrieved a relevant document.
    pub unresolved: usize,
}

impl OutcomeReport {
    pub fn class(&self, outcome: Outcome) -> &ClassStats {
        match outcome {
            Outcome::Improved => &self.improved,
            Outcome::Worsened => &self.worsened,
            Outcome::Preserved => &self.preserved,
        }
    }
}

/// A `(baseline, reformulated)` rank pair.
pub type RankPair = (Option<usize>, Option<usize>);

/// Compares paired ranks.
pub fn outcome_report(pairs: &[RankPair]) -> OutcomeReport {
    let mut by_class: BTreeMap<Outcome, Vec<RankPair>> = BTreeMap::new();
    let mut unresolved = 0;
    for &(b, r) in pairs {
        match classify_outcome(b, r) {
            Some(o) => by_class.entry(o).or_default().push((b, r)),
            None => unresolved += 1,
        }
    }
    let resolved = pairs.len() - unresolved;
    let stats = |o: Outcome| {
        let members = by_class.get(&o).map(Vec::as_slice).unwrap_or_default();
        let ranks: Vec<usize> = members.iter().filter_map(|&(_, r)| r).collect();
        let diffs: Vec<f64> = members
            .iter()
            .filter_map(|&(b, r)| Some(r? as f64 - b? as f64))
            .collect();
        ClassStats {
            count: members.len(),
            percent: if resolved == 0 {
                0.0
            } else {
                100.0 * members.len() as f64 / resolved as f64
            },
            ranks: RankStats::of(&ranks),
            mrd: (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64),
        }
    };
    OutcomeReport {
        total: pairs.len(),
        improved: stats(Outcome::Improved),
        worsened: stats(Outcome::Worsened),
        preserved: stats(Outcome::Preserved),
        unresolved,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueReport {
    pub technique: String,
    pub outcomes: OutcomeReport,
    pub retrieval: Vec<RetrievalMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub system: String,
    pub queries: usize,
    pub techniques: Vec<TechniqueReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    /// `hard` excludes queries the baseline already answers within the
    /// easy threshold; `extended` keeps every query.
    pub name: String,
    pub groups: Vec<GroupReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub format: String,
    pub config_hash: String,
    /// Ranked lists are cut here; a first hit below counts as no result.
    pub result_depth: usize,
    pub easy_threshold: usize,
    pub cutoffs: Vec<usize>,
    pub techniques: Vec<String>,
    pub requests: usize,
    pub easy_requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: ReportHeader,
    pub sets: Vec<SetReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSettings {
    pub config_hash: String,
    pub result_depth: usize,
    pub easy_threshold: usize,
    pub cutoffs: Vec<usize>,
}

fn group_report(
    system: &str,
    queries: &BTreeSet<&str>,
    baseline: &BTreeMap<&str, Option<usize>>,
    by_technique: &BTreeMap<Technique, BTreeMap<&str, Option<usize>>>,
    techniques: &[Technique],
    cutoffs: &[usize],
) -> GroupReport {
    let reports = techniques
        .iter()
        .map(|t| {
            let runs = &by_technique[t];
            let pairs: Vec<_> = queries.iter().map(|q| (baseline[q], runs[q])).collect();
            let qes: Vec<_> = pairs.iter().map(|&(_, r)| r).collect();
            TechniqueReport {
                technique: t.name().to_string(),
                outcomes: outcome_report(&pairs),
                retrieval: cutoffs
                    .iter()
                    .map(|&k| retrieval_metrics(&qes, k))
                    .collect(),
            }
        })
        .collect();
    GroupReport {
        system: system.to_string(),
        queries: queries.len(),
        techniques: reports,
    }
}

/// Builds the report from the runs of the baseline and of every technique.
/// Every technique must cover exactly the baseline's queries.
pub fn build_report(
    runs: &[QueryRun],
    techniques: &[Technique],
    settings: &ReportSettings,
) -> Result<Report> {
    let mut by_technique: BTreeMap<Technique, BTreeMap<&str, Option<usize>>> = BTreeMap::new();
    let mut systems: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    for r in runs {
        if by_technique
            .entry(r.technique)
            .or_default()
            .insert(&r.query_id, r.qe)
            .is_some()
        {
            return Err(Error::Mismatch(format!(
                "query {} appears twice for technique {}",
                r.query_id, r.technique
            )));
        }
        systems.insert(&r.query_id, r.system.as_deref());
    }
    let baseline = by_technique
        .get(&Technique::Baseline)
        .cloned()
        .ok_or_else(|| Error::Mismatch("no baseline runs".into()))?;
    let mut reported = vec![Technique::Baseline];
    reported.extend(techniques.iter().filter(|&&t| t != Technique::Baseline));
    for t in &reported {
        let ids = by_technique
            .get(t)
            .ok_or_else(|| Error::Mismatch(format!("no runs for technique {t}")))?;
        if !ids.keys().eq(baseline.keys()) {
            return Err(Error::Mismatch(format!(
                "technique {t} was run on a different query set than the baseline"
            )));
        }
    }

    let all: BTreeSet<&str> = baseline.keys().copied().collect();
    let hard: BTreeSet<&str> = all
        .iter()
        .copied()
        .filter(|q| baseline[q].is_none_or(|r| r > settings.easy_threshold))
        .collect();
    let system_names: BTreeSet<&str> = systems.values().flatten().copied().collect();

    let set = |name: &str, queries: &BTreeSet<&str>| {
        let mut groups = vec![group_report(
            ALL_SYSTEMS,
            queries,
            &baseline,
            &by_technique,
            &reported,
            &settings.cutoffs,
        )];
        for &s in &system_names {
            let subset: BTreeSet<&str> = queries
                .iter()
                .copied()
                .filter(|q| systems[q] == Some(s))
                .collect();
            groups.push(group_report(
                s,
                &subset,
                &baseline,
                &by_technique,
                &reported,
                &settings.cutoffs,
            ));
        }
        SetReport {
            name: name.to_string(),
            groups,
        }
    };

    Ok(Report {
        header: ReportHeader {
            format: REPORT_FORMAT.to_string(),
            config_hash: settings.config_hash.clone(),
            result_depth: settings.result_depth,
            easy_threshold: settings.easy_threshold,
            cutoffs: settings.cutoffs.clone(),
            techniques: reported.iter().map(|t| t.name().to_string()).collect(),
            requests: all.len(),
            easy_requests: all.len() - hard.len(),
        },
        sets: vec![set("hard", &hard), set("extended", &all)],
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format outcome table: one row per set, system, technique and class.
pub fn outcomes_csv(report: &Report) -> String {
    let mut out = String::from(
        "set,system,technique,class,count,percent,mean,q1,q2,q3,min,max,mrd,unresolved,total\n",
    );
    for set in &report.sets {
        for g in &set.groups {
            for t in &g.techniques {
                for o in Outcome::ALL {
                    let c = t.outcomes.class(o);
                    let r = c.ranks.as_ref();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        set.name,
                        g.system,
                        t.technique,
                        o.as_str(),
                        c.count,
                        c.percent,
                        opt(r.map(|r| r.mean)),
                        opt(r.map(|r| r.q1)),
                        opt(r.map(|r| r.q2)),
                        opt(r.map(|r| r.q3)),
                        opt(r.map(|r| r.min)),
                        opt(r.map(|r| r.max)),
                        opt(c.mrd),
                        t.outcomes.unresolved,
                        t.outcomes.total,
                    );
                }
            }
        }
    }
    out
}

/// One row per set, system, technique and cutoff.
pub fn retrieval_csv(report: &Report) -> String {
    let mut out = String::from("set,system,technique,k,mrr,accuracy\n");
    for set in &report.sets {
        for g in &set.groups {
            for t in &g.techniques {
                for m in &t.retrieval {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        set.name, g.system, t.technique, m.k, m.mrr, m.accuracy
                    );
                }
            }
        }
    }
    out
}

fn class_cell(c: &ClassStats) -> String {
    let mean = c
        .ranks
        .as_ref()
        .map_or("-".to_string(), |r| format!("{:.2}", r.mean));
    format!("{:>4} {:>6.2}% {:>8}", c.count, c.percent, mean)
}

/// Fixed-width tables for reading in a terminal.
pub fn render_text(report: &Report) -> String {
    let h = &report.header;
    let mut out = String::new();
    let _ = writeln!(out, "{}  config {}", h.format, h.config_hash);
    let _ = writeln!(
        out,
        "requests {}  easy (baseline rank <= {}) {}  result depth {}",
        h.requests, h.easy_threshold, h.easy_requests, h.result_depth
    );
    for set in &report.sets {
        for g in &set.groups {
            let _ = writeln!(out, "\n[{} / {}] {} queries", set.name, g.system, g.queries);
            let _ = writeln!(
                out,
                "{:<12} {:>21} {:>21} {:>21} {:>10}",
                "technique",
                "improved (n % mean)",
                "worsened (n % mean)",
                "preserved (n % mean)",
                "unresolved"
            );
            for t in &g.techniques {
                let o = &t.outcomes;
                let _ = writeln!(
                    out,
                    "{:<12} {:>21} {:>21} {:>21} {:>10}",
                    t.technique,
                    class_cell(&o.improved),
                    class_cell(&o.worsened),
                    class_cell(&o.preserved),
                    o.unresolved
                );
            }
            let _ = write!(out, "{:<12}", "technique");
            for k in &h.cutoffs {
                let _ = write!(out, " {:>9} {:>9}", format!("top{k}"), format!("mrr@{k}"));
            }
            out.push('\n');
            for t in &g.techniques {
                let _ = write!(out, "{:<12}", t.technique);
                for m in &t.retrieval {
                    let _ = write!(out, " {:>8.2}% {:>9.4}", 100.0 * m.accuracy, m.mrr);
                }
                out.push('\n');
            }
        }
    }
    out
}
