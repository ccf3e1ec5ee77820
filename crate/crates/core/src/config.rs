//! Experiment configuration file (TOML). Every field is optional; command
//! line flags override the file.
//!
//! ```toml
//! [corpus]
//! extensions = ["java"]
//! [corpus.options]
//! stemming = false
//! min_term_length = 3
//!
//! [pipeline]
//! feedback_size = 10
//! reformulation_size = 10
//! result_depth = 5000
//! [pipeline.rank]
//! damping = 0.85
//! tolerance = 0.0001
//! max_iterations = 100
//!
//! [learner]
//! seed = 0
//! resample_count = 50
//!
//! [eval]
//! easy_threshold = 10
//! cutoffs = [10, 20, 50, 100]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::eval::DEFAULT_CUTOFFS;
use crate::learner::{EnsembleConfig, TreeConfig};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub seed: u64,
    pub resample_count: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Train one model per system in addition to the global one.
    pub per_system: bool,
    pub folds: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let tree = TreeConfig::default();
        LearnerConfig {
            seed: 0,
            resample_count: EnsembleConfig::default().resample_count,
            max_depth: tree.max_depth,
            min_leaf: tree.min_leaf,
            per_system: false,
            folds: 10,
        }
    }
}

impl LearnerConfig {
    pub fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig {
            resample_count: self.resample_count,
            tree: TreeConfig {
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Requests whose baseline rank is at most this are left out of the
    /// hard query set.
    pub easy_threshold: usize,
    pub cutoffs: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            easy_threshold: 10,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub corpus: CorpusConfig,
    pub pipeline: PipelineConfig,
    pub learner: LearnerConfig,
    pub eval: EvalConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if self.learner.resample_count == 0 || self.learner.folds == 0 {
            return Err(Error::Config(
                "resample count and folds must be at least 1".into(),
            ));
        }
        if self.eval.cutoffs.is_empty() || self.eval.cutoffs.contains(&0) {
            return Err(Error::Config(
                "cutoffs must be a nonempty list of positive ranks".into(),
            ));
        }
        if self.corpus.extensions.is_empty() {
            return Err(Error::Config(
                "at least one file extension is required".into(),
            ));
        }
        Ok(())
    }

    /// Short SHA-256 digest of every setting except file paths.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(corpus) = value.get_mut("corpus").and_then(|c| c.as_object_mut()) {
            corpus.remove("stopwords");
            corpus.remove("keywords");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.pipeline.feedback_size, 10);
        assert_eq!(c.pipeline.reformulation_size, 10);
        assert_eq!(c.pipeline.rank.damping, 0.85);
        assert_eq!(c.pipeline.rank.tolerance, 1e-4);
        assert_eq!(c.pipeline.rank.max_iterations, 100);
        c.validate().unwrap();
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let c = Config::parse("[pipeline.rank]\ndamping = 0.5\n[learner]\nseed = 9\n").unwrap();
        assert_eq!(c.pipeline.rank.damping, 0.5);
        assert_eq!(c.pipeline.rank.max_iterations, 100);
        assert_eq!(c.learner.seed, 9);
        assert_eq!(c.learner.resample_count, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Config::parse("[pipeline]\nfeedback = 3\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn hash_ignores_paths_only() {
        let base = Config::default();
        let mut with_path = base.clone();
        with_path.corpus.stopwords = Some("/tmp/stop.txt".into());
        assert_eq!(base.hash(), with_path.hash());
        let mut changed = base.clone();
        changed.pipeline.feedback_size = 5;
        assert_ne!(base.hash(), changed.hash());
        assert_eq!(base.hash().len(), 16);
    }
}
