//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qreform::corpus::split_token;
use qreform::eval::{query_effectiveness, retrieval_metrics, AuditRecord};
use qreform::graph::{code_rank, RankParams, TermGraph};
use qreform::index::Index;
use qreform::learner::{
    fit_tree, select_best, train, CandidateKind, EnsembleConfig, Model, TrainingRow, TreeConfig,
};
use qreform::quality::{QualityVector, METRIC_COUNT};

type Check = std::result::Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn rank(edges: &[(&str, &str)], vertices: &[&str]) -> BTreeMap<String, f64> {
    let g = TermGraph::from_edges(vertices.iter().copied(), edges.iter().copied());
    code_rank(&g, &RankParams::default()).scores
}

fn coderank_fixed_points() -> Check {
    let start = Instant::now();
    let iso = rank(&[], &["a"]);
    // 0.15 is not representable; the teleport term is exactly 1 - 0.85
    let teleport = 1.0 - RankParams::default().damping;
    ensure!(
        iso["a"] == teleport && (iso["a"] - 0.15).abs() <= 1e-15,
        "isolated vertex scored {}",
        iso["a"]
    );

    let pair = rank(&[("a", "b")], &[]);
    for (t, s) in &pair {
        ensure!((s - 1.0).abs() <= 1e-4, "mutual link {t} scored {s}");
    }

    let path = rank(&[("a", "b"), ("b", "c")], &[]);
    let want = [("a", 0.7703), ("b", 1.4595), ("c", 0.7703)];
    for (t, w) in want {
        ensure!(
            (path[t] - w).abs() <= 1e-3,
            "path vertex {t}: {} vs {w}",
            path[t]
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "path = {{{:.4}, {:.4}, {:.4}}} in {elapsed:?}",
        path["a"], path["b"], path["c"]
    ))
}

fn random_connected_graph(rng: &mut ChaCha8Rng) -> TermGraph {
    let n = rng.gen_range(2..=50);
    let names: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
    let mut edges = Vec::new();
    // random spanning tree, then extra edges
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i));
    }
    for _ in 0..rng.gen_range(0..=2 * n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.push((a, b));
        }
    }
    TermGraph::from_edges(
        names.iter().map(String::as_str),
        edges
            .iter()
            .map(|&(a, b)| (names[a].as_str(), names[b].as_str())),
    )
}

fn score_conservation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut converged = 0;
    let mut worst = 0.0f64;
    let mut max_iter = 0;
    for g in 0..100 {
        let graph = random_connected_graph(&mut rng);
        let n = graph.vertex_count() as f64;
        let scores = code_rank(&graph, &RankParams::default());
        let sum: f64 = scores.scores.values().sum();
        let err = (sum - n).abs();
        ensure!(err <= n * 1e-3, "graph {g}: sum {sum} over {n} vertices");
        worst = worst.max(err / n);
        converged += usize::from(scores.converged && scores.iterations <= 100);
        max_iter = max_iter.max(scores.iterations);
    }
    ensure!(converged >= 99, "only {converged}/100 converged");
    Ok(format!(
        "{converged}/100 converged (at most {max_iter} iterations), worst relative error {worst:.2e}"
    ))
}

/// Dense cosine ranking computed directly from the raw term lists.
fn dense_ranking(docs: &[(String, Vec<String>)], query: &[String]) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, terms) in docs {
        for t in terms.iter().collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let vocab: Vec<&str> = df.keys().copied().collect();
    let idf = |t: &str| (n / df[t] as f64).ln();
    let count = |terms: &[String], t: &str| terms.iter().filter(|x| *x == t).count() as f64;

    // unseen query terms have no dimension in the document space
    let mut qvec: Vec<f64> = vocab.iter().map(|t| count(query, t) * idf(t)).collect();
    let qnorm = qvec.iter().map(|w| w * w).sum::<f64>().sqrt();
    qvec.iter_mut().for_each(|w| *w /= qnorm);

    let mut out = Vec::new();
    for (id, terms) in docs {
        let dvec: Vec<f64> = vocab
            .iter()
            .map(|t| {
                let tf = count(terms, t);
                if tf > 0.0 {
                    (1.0 + tf.ln()) * idf(t)
                } else {
                    0.0
                }
            })
            .collect();
        let dnorm = dvec.iter().map(|w| w * w).sum::<f64>().sqrt();
        if dnorm == 0.0 || qnorm == 0.0 {
            continue;
        }
        let score: f64 = qvec.iter().zip(&dvec).map(|(q, d)| q * d).sum::<f64>() / dnorm;
        if score > 0.0 {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

fn search_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut compared = 0;
    for c in 0..50 {
        let vocab: Vec<String> = (0..rng.gen_range(1..=30))
            .map(|i| format!("t{i:02}"))
            .collect();
        let docs: Vec<(String, Vec<String>)> = (0..rng.gen_range(1..=20))
            .map(|d| {
                let len = rng.gen_range(1..=15);
                let terms = (0..len)
                    .map(|_| vocab.choose(&mut rng).unwrap().clone())
                    .collect();
                (format!("d{d:02}"), terms)
            })
            .collect();
        let index = Index::from_term_lists(&docs).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let mut query: Vec<String> = (0..rng.gen_range(1..=5))
                .map(|_| vocab.choose(&mut rng).unwrap().clone())
                .collect();
            if rng.gen_bool(0.2) {
                query.push("unseen".into());
            }
            let got = index.search(&query, docs.len());
            let want = dense_ranking(&docs, &query);
            let got_ids: Vec<&str> = got.ids();
            let want_ids: Vec<&str> = want.iter().map(|(id, _)| id.as_str()).collect();
            ensure!(
                got_ids == want_ids,
                "corpus {c}, query {query:?}: {got_ids:?} vs {want_ids:?}"
            );
            for (h, (_, s)) in got.hits.iter().zip(&want) {
                ensure!(
                    (h.score - s).abs() <= 1e-9,
                    "corpus {c}: {} scored {} vs {s}",
                    h.doc,
                    h.score
                );
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} queries over 50 corpora match"))
}

fn splitter() -> Check {
    let cases: [(&str, &[&str]); 3] = [
        (
            "resolveRuntimeClasspathEntry",
            &["resolve", "Runtime", "Classpath", "Entry"],
        ),
        ("getChatRoomBots", &["get", "Chat", "Room", "Bots"]),
        ("reverse_traversal", &["reverse", "traversal"]),
    ];
    for (token, want) in cases {
        let got = split_token(token);
        ensure!(got == want, "{token} split into {got:?}");
    }
    let alphabet: Vec<char> = "abcxyzABCXYZ0129_$-.".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let token: String = (0..rng.gen_range(1..=24))
            .map(|_| *alphabet.choose(&mut rng).unwrap())
            .collect();
        let pieces = split_token(&token);
        let stripped: String = token.chars().filter(|c| c.is_alphanumeric()).collect();
        ensure!(pieces.concat() == stripped, "{token} split into {pieces:?}");
        ensure!(
            pieces.iter().all(|p| !p.is_empty()),
            "{token} gave an empty piece"
        );
    }
    Ok("3 reference splits, 1000 fuzz tokens".into())
}

fn metrics_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut qes = Vec::new();
    let mut brute_rr: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut brute_hit: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    let cutoffs = [1, 5, 10, 20];
    for _ in 0..200 {
        let mut docs: Vec<String> = (0..rng.gen_range(1..=40))
            .map(|i| format!("f{i}"))
            .collect();
        docs.shuffle(&mut rng);
        let ranked: Vec<String> = docs[..rng.gen_range(0..=docs.len())].to_vec();
        let goldset: BTreeSet<String> =
            docs.iter().filter(|_| rng.gen_bool(0.1)).cloned().collect();

        let mut first = None;
        for (i, d) in ranked.iter().enumerate() {
            if goldset.contains(d) {
                first = Some(i + 1);
                break;
            }
        }
        let qe = query_effectiveness(&ranked, &goldset);
        ensure!(qe == first, "QE {qe:?} vs brute {first:?}");
        qes.push(qe);
        for k in cutoffs {
            let top = &ranked[..ranked.len().min(k)];
            let hit = top.iter().position(|d| goldset.contains(d));
            brute_rr
                .entry(k)
                .or_default()
                .push(hit.map_or(0.0, |i| 1.0 / (i + 1) as f64));
            brute_hit.entry(k).or_default().push(hit.is_some());
        }
    }
    for k in cutoffs {
        let m = retrieval_metrics(&qes, k);
        let rr = &brute_rr[&k];
        let mrr = rr.iter().sum::<f64>() / rr.len() as f64;
        let acc = brute_hit[&k].iter().filter(|&&h| h).count() as f64 / 200.0;
        ensure!(m.mrr == mrr, "MRR@{k} {} vs {mrr}", m.mrr);
        ensure!(m.accuracy == acc, "Top-{k} {} vs {acc}", m.accuracy);
    }
    let example = retrieval_metrics(&[Some(2), Some(10), None], 10).mrr;
    ensure!((example - 0.2).abs() < 1e-12, "MRR example gave {example}");
    Ok("200 pairs at K in {1,5,10,20}, example MRR 0.2".into())
}

fn row(x: [f64; 2], label: bool, i: usize) -> TrainingRow {
    let mut f = [0.0; METRIC_COUNT];
    f[..2].copy_from_slice(&x);
    TrainingRow {
        query_id: i.to_string(),
        kind: CandidateKind::Msig,
        features: QualityVector(f),
        label,
    }
}

fn learner() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows: Vec<TrainingRow> = (0..200)
        .map(|i| {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            row(x, x[0] + 0.5 * x[1] > 0.75, i)
        })
        .collect();
    let x: Vec<&[f64]> = rows.iter().map(|r| r.features.values()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.label).collect();
    // fully grown: a two-row leaf cannot be split under the default min leaf
    let full = TreeConfig {
        min_leaf: 1,
        ..TreeConfig::default()
    };
    let tree = fit_tree(&x, &y, &full);
    let correct = rows
        .iter()
        .filter(|r| (tree.predict(r.features.values()) >= 0.5) == r.label)
        .count();
    ensure!(
        correct == 200,
        "single tree got {correct}/200 training rows right"
    );

    let config = EnsembleConfig::default();
    let (a, b) = (train(&rows, &config, 42), train(&rows, &config, 42));
    ensure!(
        a.trees().len() == 50,
        "ensemble has {} trees",
        a.trees().len()
    );
    for r in &rows {
        ensure!(
            a.predict(&r.features) == b.predict(&r.features),
            "seeded runs disagree"
        );
    }
    ensure!(a == b, "seeded ensembles differ structurally");
    Ok(format!(
        "tree depth {}, 50-tree ensembles identical",
        tree.depth()
    ))
}

fn qreform(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qreform"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "qreform {} failed: {}",
            args.first().unwrap_or(&""),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

struct FixtureRun {
    dir: tempfile::TempDir,
    elapsed: Duration,
}

impl FixtureRun {
    fn report(&self) -> PathBuf {
        self.dir.path().join("report")
    }

    fn model(&self) -> PathBuf {
        self.dir.path().join("model")
    }
}

fn run_fixture() -> Result<FixtureRun, String> {
    let f = fixtures();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let s = |path: PathBuf| path.to_string_lossy().into_owned();
    let (config, requests) = (s(f.join("config.toml")), s(f.join("requests.jsonl")));
    let start = Instant::now();
    qreform(&[
        "index",
        &s(f.join("minicorpus")),
        "-o",
        &p("index"),
        "--config",
        &config,
    ])?;
    qreform(&[
        "train",
        "--config",
        &config,
        "-d",
        &requests,
        "-i",
        &p("index"),
        "-o",
        &p("model"),
    ])?;
    qreform(&[
        "evaluate",
        "--config",
        &config,
        "-d",
        &requests,
        "-i",
        &p("index"),
        "-m",
        &p("model"),
        "-t",
        "acer,msig,fsig,comb,tf,tfidf,rocchio,rsv",
        "-o",
        &p("report"),
    ])?;
    Ok(FixtureRun {
        elapsed: start.elapsed(),
        dir,
    })
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn audits(run: &FixtureRun) -> Result<Vec<AuditRecord>, String> {
    read(&run.report().join("audit.jsonl"))?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

type Qe = Option<usize>;

/// Outcome counts and MRR recomputed from runs.csv alone, then compared with
/// the `all` group of each query set in report.json.
fn check_report_against_runs(run: &FixtureRun, easy_threshold: usize) -> Result<(), String> {
    let mut qes: BTreeMap<String, BTreeMap<String, Qe>> = BTreeMap::new();
    let mut reader =
        csv::Reader::from_path(run.report().join("runs.csv")).map_err(|e| e.to_string())?;
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let qe = rec[3].parse().ok();
        qes.entry(rec[2].to_string())
            .or_default()
            .insert(rec[0].to_string(), qe);
    }
    let report: Value = serde_json::from_str(&read(&run.report().join("report.json"))?)
        .map_err(|e| e.to_string())?;
    let base = &qes["baseline"];
    for set in report["sets"].as_array().ok_or("report has no sets")? {
        let hard = set["name"] == "hard";
        let ids: Vec<&String> = base
            .iter()
            .filter(|(_, qe)| !hard || qe.is_none_or(|r| r > easy_threshold))
            .map(|(id, _)| id)
            .collect();
        let all = &set["groups"][0];
        ensure!(all["system"] == "all", "first group is {}", all["system"]);
        ensure!(
            all["queries"] == ids.len(),
            "{} set size {} vs {}",
            set["name"],
            all["queries"],
            ids.len()
        );
        for t in all["techniques"].as_array().ok_or("no techniques")? {
            let name = t["technique"].as_str().unwrap_or_default();
            let mine = &qes[name];
            let (mut imp, mut wor, mut pre, mut unr) = (0, 0, 0, 0);
            for id in &ids {
                match (base[*id], mine[*id]) {
                    (None, None) => unr += 1,
                    (b, r) if b == r => pre += 1,
                    (None, Some(_)) => imp += 1,
                    (Some(_), None) => wor += 1,
                    (Some(b), Some(r)) if r < b => imp += 1,
                    _ => wor += 1,
                }
            }
            let o = &t["outcomes"];
            let got = (
                &o["improved"]["count"],
                &o["worsened"]["count"],
                &o["preserved"]["count"],
                &o["unresolved"],
            );
            ensure!(
                got == (&imp.into(), &wor.into(), &pre.into(), &unr.into()),
                "{}/{name}: report {got:?} vs runs ({imp}, {wor}, {pre}, {unr})",
                set["name"]
            );
            for r in t["retrieval"].as_array().ok_or("no retrieval rows")? {
                let k = r["k"].as_u64().unwrap_or_default() as usize;
                let mrr = ids
                    .iter()
                    .map(|id| {
                        mine[*id]
                            .filter(|&q| q <= k)
                            .map_or(0.0, |q| 1.0 / q as f64)
                    })
                    .sum::<f64>()
                    / ids.len().max(1) as f64;
                let reported = r["mrr"].as_f64().unwrap_or(f64::NAN);
                ensure!(
                    (reported - mrr).abs() < 1e-12,
                    "{}/{name} MRR@{k} {reported} vs {mrr}",
                    set["name"]
                );
            }
        }
    }
    Ok(())
}

const DECOY: &str = "frobnicator";

fn end_to_end(run: &Result<FixtureRun, String>) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    ensure!(
        run.elapsed < Duration::from_secs(30),
        "fixture took {:?}",
        run.elapsed
    );
    let golden = fixtures().join("golden");
    let mut names: Vec<_> = std::fs::read_dir(&golden)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    names.sort();
    ensure!(!names.is_empty(), "no golden files");
    for name in &names {
        let want = std::fs::read(golden.join(name)).map_err(|e| e.to_string())?;
        let got = std::fs::read(run.report().join(name)).map_err(|e| e.to_string())?;
        ensure!(
            got == want,
            "{} differs from golden",
            name.to_string_lossy()
        );
    }

    let audits = audits(run)?;
    ensure!(audits.len() == 5, "{} audit records", audits.len());
    for a in &audits {
        let msig = a
            .reformulation
            .candidate(CandidateKind::Msig)
            .ok_or_else(|| format!("{} has no msig candidate", a.query_id))?;
        ensure!(
            !msig.terms.iter().any(|t| t == DECOY),
            "decoy in msig candidate of {}",
            a.query_id
        );
    }
    let runs = read(&run.report().join("runs.csv"))?;
    ensure!(
        runs.lines().any(|l| l.contains(DECOY)),
        "decoy never surfaced in a whole-document expansion"
    );
    check_report_against_runs(run, 1)?;
    Ok(format!(
        "{} golden files identical in {:.2?}; decoy absent from msig",
        names.len(),
        run.elapsed
    ))
}

fn audit_replay(run: &Result<FixtureRun, String>) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    let model = Model::load(&run.model()).map_err(|e| e.to_string())?;
    let audits = audits(run)?;
    for a in &audits {
        let r = &a.reformulation;
        let ensemble = model
            .ensemble_for(a.system.as_deref())
            .ok_or("model has no ensemble")?;
        let sel = select_best(&r.audit_candidates(), ensemble).ok_or("no candidates")?;
        ensure!(
            Some(sel.kind) == r.kind,
            "{}: replay chose {} vs {:?}",
            a.query_id,
            sel.kind,
            r.kind
        );
        ensure!(
            sel.terms == r.final_terms,
            "{}: replayed terms differ",
            a.query_id
        );
        let recorded: Vec<Option<f64>> = r.candidates.iter().map(|c| c.probability).collect();
        let replayed: Vec<Option<f64>> = sel.probabilities.iter().copied().map(Some).collect();
        ensure!(recorded == replayed, "{}: probabilities differ", a.query_id);
    }
    Ok(format!(
        "{}/{} choices reproduced",
        audits.len(),
        audits.len()
    ))
}

fn main() {
    let fixture = run_fixture();
    let criteria: [Criterion; 8] = [
        ("1 coderank fixed points", Box::new(coderank_fixed_points)),
        ("2 score conservation", Box::new(score_conservation)),
        ("3 search oracle", Box::new(search_oracle)),
        ("4 splitter", Box::new(splitter)),
        ("5 metrics oracle", Box::new(metrics_oracle)),
        ("6 learner", Box::new(learner)),
        ("7 end-to-end fixture", Box::new(|| end_to_end(&fixture))),
        ("8 pipeline audit", Box::new(|| audit_replay(&fixture))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
