//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::config::Config;
use crate::corpus::load_corpus;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, load_dataset, render_text, train_model, write_evaluation, EvalSettings,
    TrainingSettings,
};
use crate::learner::{write_training_rows, Model};
use crate::pipeline::{reformulate, Engine, Reformulation, Technique};

#[derive(Debug, Parser)]
#[command(
    name = "qreform",
    version,
    about = "Query reformulation for concept location in source code"
)]
pub struct Cli {
    /// TOML configuration file; flags given on the command line override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output on stderr (-v info, -vv debug) [default: warnings only]
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist the search index of a source tree
    Index(IndexArgs),
    /// Reformulate one query and print the audit record as JSON
    Reformulate(ReformulateArgs),
    /// Measure candidate reformulations on a dataset and train the selector
    Train(TrainArgs),
    /// Run the evaluation protocol and write report files
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Pseudo-relevance feedback size K [default: 10]
    #[arg(short = 'K', long, value_name = "N")]
    pub feedback_size: Option<usize>,
    /// Number of terms appended to the query, k [default: 10]
    #[arg(short = 'k', long, value_name = "N")]
    pub reformulation_size: Option<usize>,
    /// CodeRank damping factor [default: 0.85]
    #[arg(long, value_name = "X")]
    pub damping: Option<f64>,
    /// CodeRank convergence tolerance [default: 0.0001]
    #[arg(long, value_name = "X")]
    pub tolerance: Option<f64>,
    /// CodeRank iteration cap [default: 100]
    #[arg(long, value_name = "N")]
    pub max_iterations: Option<usize>,
    /// Ranked lists are cut at this depth [default: 5000]
    #[arg(long, value_name = "N")]
    pub result_depth: Option<usize>,
}

impl PipelineArgs {
    fn apply(&self, c: &mut Config) {
        let p = &mut c.pipeline;
        set(&mut p.feedback_size, self.feedback_size);
        set(&mut p.reformulation_size, self.reformulation_size);
        set(&mut p.rank.damping, self.damping);
        set(&mut p.rank.tolerance, self.tolerance);
        set(&mut p.rank.max_iterations, self.max_iterations);
        set(&mut p.result_depth, self.result_depth);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Root directory of the source files
    pub corpus_root: PathBuf,
    /// Index file to write
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    /// File extensions to index, comma separated [default: java]
    #[arg(long, value_delimiter = ',', value_name = "EXT")]
    pub extensions: Option<Vec<String>>,
    /// Stopword list, one word per line [default: bundled English list]
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Keyword list, one word per line [default: bundled Java keywords]
    #[arg(long, value_name = "FILE")]
    pub keywords: Option<PathBuf>,
    /// Apply Snowball stemming to terms [default: off]
    #[arg(long)]
    pub stemming: bool,
    /// Shortest term kept [default: 3]
    #[arg(long, value_name = "N")]
    pub min_term_length: Option<usize>,
    /// Split same-case identifiers with a corpus word-frequency lexicon [default: off]
    #[arg(long)]
    pub lexicon_split: bool,
    /// Do not index structured identifiers alongside their split terms [default: indexed]
    #[arg(long)]
    pub no_original_tokens: bool,
}

#[derive(Debug, Args)]
pub struct ReformulateArgs {
    /// Query text, e.g. a bug report title
    #[arg(short, long, value_name = "TEXT")]
    pub query: String,
    /// Index file built by `index`
    #[arg(short, long, value_name = "FILE")]
    pub index: PathBuf,
    /// Model file built by `train`; required unless --candidates-only
    #[arg(short, long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Report every candidate without choosing one [default: off]
    #[arg(long)]
    pub candidates_only: bool,
    /// System name used to pick a per-system model [default: global model]
    #[arg(long, value_name = "NAME")]
    pub system: Option<String>,
    /// Query id echoed in the output record [default: query]
    #[arg(long, value_name = "ID")]
    pub id: Option<String>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Change-request dataset (JSON lines)
    #[arg(short, long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Index file built by `index`
    #[arg(short, long, value_name = "FILE")]
    pub index: PathBuf,
    /// Model file to write
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    /// Seed for bootstrap resampling [default: 0]
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of bootstrap resamples (trees) [default: 50]
    #[arg(long, value_name = "N")]
    pub resamples: Option<usize>,
    /// Maximum tree depth [default: 8]
    #[arg(long, value_name = "N")]
    pub max_depth: Option<usize>,
    /// Minimum rows per leaf [default: 2]
    #[arg(long, value_name = "N")]
    pub min_leaf: Option<usize>,
    /// Cross-validation folds [default: 10]
    #[arg(long, value_name = "N")]
    pub folds: Option<usize>,
    /// Also train one model per system [default: global model only]
    #[arg(long)]
    pub per_system: bool,
    /// Write the labelled training rows to this CSV file [default: not written]
    #[arg(long, value_name = "FILE")]
    pub rows: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Change-request dataset (JSON lines)
    #[arg(short, long, value_name = "FILE")]
    pub dataset: PathBuf,
    /// Index file built by `index`
    #[arg(short, long, value_name = "FILE")]
    pub index: PathBuf,
    /// Model file built by `train`; needed for `acer`
    #[arg(short, long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Techniques to compare with the baseline, comma separated [default: acer,tf,tfidf,rocchio,rsv]
    #[arg(short, long, value_delimiter = ',', value_name = "LIST")]
    pub techniques: Option<Vec<String>>,
    /// Directory for the report files [default: report]
    #[arg(short, long, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Requests whose baseline rank is at most N count as easy [default: 10]
    #[arg(long, value_name = "N")]
    pub easy_threshold: Option<usize>,
    /// Cutoffs for MRR@K and Top-K accuracy, comma separated [default: 10,20,50,100]
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub cutoffs: Option<Vec<usize>>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

pub const DEFAULT_TECHNIQUES: &str = "acer,tf,tfidf,rocchio,rsv";

fn base_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

#[derive(Serialize)]
struct ReformulationRecord<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<&'a str>,
    config_hash: String,
    #[serde(flatten)]
    reformulation: &'a Reformulation,
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

pub fn parse_techniques(names: &[String]) -> Result<Vec<Technique>> {
    let mut out = Vec::new();
    for n in names {
        let t: Technique = n.trim().parse()?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Runs one command, writing its primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut config = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Index(a) => {
            let c = &mut config.corpus;
            set(&mut c.extensions, a.extensions);
            if a.stopwords.is_some() {
                c.stopwords = a.stopwords;
            }
            if a.keywords.is_some() {
                c.keywords = a.keywords;
            }
            c.options.stemming |= a.stemming;
            c.options.lexicon_split |= a.lexicon_split;
            if a.no_original_tokens {
                c.options.keep_original_tokens = false;
            }
            set(&mut c.options.min_term_length, a.min_term_length);
            config.validate()?;

            let corpus = load_corpus(&a.corpus_root, &config.corpus)?;
            let engine = Engine::build(&corpus)?;
            engine.save(&a.output)?;
            say(
                out,
                &format!(
                    "indexed {} documents, {} terms ({} files skipped) -> {}",
                    engine.index().doc_count(),
                    engine.index().vocabulary_size(),
                    corpus.report.skipped.len(),
                    a.output.display()
                ),
            )
        }
        Command::Reformulate(a) => {
            a.pipeline.apply(&mut config);
            config.validate()?;
            let model = match (&a.model, a.candidates_only) {
                (_, true) => None,
                (Some(p), false) => Some(Model::load(p)?),
                (None, false) => {
                    return Err(Error::Config(
                        "reformulate needs --model unless --candidates-only is given".into(),
                    ))
                }
            };
            let engine = Engine::load(&a.index)?;
            let ensemble = match &model {
                Some(m) => Some(m.ensemble_for(a.system.as_deref()).ok_or_else(|| {
                    Error::format("model", "no ensemble for this system and no global model")
                })?),
                None => None,
            };
            let r = reformulate(&engine, &a.query, &config.pipeline, ensemble)?;
            json_line(
                out,
                &ReformulationRecord {
                    id: a.id.as_deref().unwrap_or("query"),
                    system: a.system.as_deref(),
                    config_hash: config.hash(),
                    reformulation: &r,
                },
            )
        }
        Command::Train(a) => {
            a.pipeline.apply(&mut config);
            let l = &mut config.learner;
            set(&mut l.seed, a.seed);
            set(&mut l.resample_count, a.resamples);
            set(&mut l.max_depth, a.max_depth);
            set(&mut l.min_leaf, a.min_leaf);
            set(&mut l.folds, a.folds);
            l.per_system |= a.per_system;
            config.validate()?;

            let engine = Engine::load(&a.index)?;
            let dataset = load_dataset(&a.dataset, engine.index(), |t| engine.prepare(t).is_ok())?;
            let settings = TrainingSettings {
                pipeline: config.pipeline.clone(),
                ensemble: config.learner.ensemble(),
                seed: config.learner.seed,
                per_system: config.learner.per_system,
                folds: config.learner.folds,
            };
            let trained = train_model(&engine, &dataset.requests, &settings)?;
            trained.model.save(&a.output)?;
            if let Some(path) = &a.rows {
                let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
                write_training_rows(&trained.rows, file)?;
            }
            let cv = &trained.cross_validation;
            say(
                out,
                &format!(
                    "trained on {} requests ({} rows, {} dropped, {} without feedback, {} with no hit)\n\
                     {}-fold cross-validation: {}/{} correct ({:.2}%)\n\
                     config {} -> {}",
                    dataset.requests.len() - trained.no_feedback.len(),
                    trained.rows.len(),
                    dataset.dropped.len(),
                    trained.no_feedback.len(),
                    trained.flagged.len(),
                    cv.folds,
                    cv.correct,
                    cv.evaluated,
                    100.0 * cv.accuracy(),
                    config.hash(),
                    a.output.display()
                ),
            )
        }
        Command::Evaluate(a) => {
            a.pipeline.apply(&mut config);
            set(&mut config.eval.easy_threshold, a.easy_threshold);
            set(&mut config.eval.cutoffs, a.cutoffs);
            config.validate()?;
            let names = a
                .techniques
                .unwrap_or_else(|| DEFAULT_TECHNIQUES.split(',').map(String::from).collect());
            let techniques = parse_techniques(&names)?;
            let model = a.model.as_deref().map(Model::load).transpose()?;

            let engine = Engine::load(&a.index)?;
            let dataset = load_dataset(&a.dataset, engine.index(), |t| engine.prepare(t).is_ok())?;
            info!(
                "{} requests kept, {} dropped",
                dataset.requests.len(),
                dataset.dropped.len()
            );
            let settings = EvalSettings {
                pipeline: config.pipeline.clone(),
                easy_threshold: config.eval.easy_threshold,
                cutoffs: config.eval.cutoffs.clone(),
                config_hash: config.hash(),
            };
            let evaluation = evaluate(
                &engine,
                &dataset.requests,
                &techniques,
                model.as_ref(),
                &settings,
            )?;
            let dir = a.output.unwrap_or_else(|| PathBuf::from("report"));
            write_evaluation(&dir, &evaluation)?;
            write!(out, "{}", render_text(&evaluation.report)).map_err(|e| Error::io("<stdout>", e))
        }
    }
}
