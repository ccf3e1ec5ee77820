//! Bootstrap-aggregated trees and the persisted model file.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Tree, TreeConfig};
use super::TrainingRow;
use crate::error::{Error, Result};
use crate::quality::{QualityVector, METRIC_COUNT, METRIC_NAMES};

const MODEL_MAGIC: &str = "QRMODEL 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub resample_count: usize,
    pub tree: TreeConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            resample_count: 50,
            tree: TreeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub config: EnsembleConfig,
    pub seed: u64,
    trees: Vec<Tree>,
}

impl Ensemble {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict(&self, features: &QualityVector) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.predict(features.values()))
            .sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }

    #[cfg(test)]
    pub(crate) fn map_leaves(&self, f: impl Fn(f64) -> f64 + Copy) -> Ensemble {
        Ensemble {
            config: self.config,
            seed: self.seed,
            trees: self.trees.iter().map(|t| t.map_leaves(f)).collect(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.trees.is_empty() {
            return Err("ensemble has no trees".into());
        }
        self.trees.iter().try_for_each(|t| t.validate(METRIC_COUNT))
    }
}

/// Train `config.resample_count` trees, each on a bootstrap draw of
/// `rows.len()` rows taken with replacement. Tree `i` uses stream `i` of a
/// ChaCha8 generator seeded with `seed`.
pub fn train(rows: &[TrainingRow], config: &EnsembleConfig, seed: u64) -> Ensemble {
    assert!(!rows.is_empty(), "cannot train on zero rows");
    let count = config.resample_count.max(1);
    let trees = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<&TrainingRow> = (0..rows.len())
                .map(|_| &rows[rng.gen_range(0..rows.len())])
                .collect();
            let x: Vec<&[f64]> = sample.iter().map(|r| r.features.values()).collect();
            let y: Vec<bool> = sample.iter().map(|r| r.label).collect();
            fit_tree(&x, &y, &config.tree)
        })
        .collect();
    Ensemble {
        config: EnsembleConfig {
            resample_count: count,
            ..*config
        },
        seed,
        trees,
    }
}

/// Key under which the global (all-system) model is stored.
pub const GLOBAL_MODEL: &str = "*";

/// A model file: one global ensemble and/or one ensemble per system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub metrics: Vec<String>,
    pub ensembles: BTreeMap<String, Ensemble>,
}

impl Model {
    pub fn global(ensemble: Ensemble) -> Self {
        Model::from_map(BTreeMap::from([(GLOBAL_MODEL.to_string(), ensemble)]))
    }

    pub fn from_map(ensembles: BTreeMap<String, Ensemble>) -> Self {
        Model {
            metrics: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
            ensembles,
        }
    }

    /// The ensemble for `system`, falling back to the global one.
    pub fn ensemble_for(&self, system: Option<&str>) -> Option<&Ensemble> {
        system
            .and_then(|s| self.ensembles.get(s))
            .or_else(|| self.ensembles.get(GLOBAL_MODEL))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = format!("{MODEL_MAGIC}\n").into_bytes();
        serde_json::to_writer(&mut out, self).map_err(|e| Error::Serialize(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::format("model", e))?;
        let body = text
            .strip_prefix(MODEL_MAGIC)
            .and_then(|rest| rest.strip_prefix('\n'))
            .ok_or_else(|| Error::format("model", format!("missing `{MODEL_MAGIC}` header")))?;
        let model: Model = serde_json::from_str(body).map_err(|e| Error::format("model", e))?;
        if model.metrics != METRIC_NAMES {
            return Err(Error::format(
                "model",
                "metric schema differs from this build",
            ));
        }
        if model.ensembles.is_empty() {
            return Err(Error::format("model", "no ensembles"));
        }
        for (name, e) in &model.ensembles {
            e.validate()
                .map_err(|r| Error::format("model", format!("{name}: {r}")))?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes)
    }
}
