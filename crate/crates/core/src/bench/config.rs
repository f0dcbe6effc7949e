//! Benchmark configuration: a TOML file describing datasets, model kinds,
//! algorithms and protocol parameters.
//!
//! ```toml
//! seed = 42
//! n_instances = 20
//! n_runs = 5
//! output_dir = "out"
//!
//! [[datasets]]
//! name = "diabetes"
//! csv = "data/diabetes.csv"
//! schema = "data/diabetes.schema.json"
//!
//! [models]
//! kinds = ["tree", "forest", "neural"]
//!
//! [algorithms]
//! ids = ["watcher", "growing_spheres", "dice", "prototype"]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cf::Algorithm;
use crate::data::FeatureSchema;
use crate::error::{Error, Result};
use crate::models::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub csv: PathBuf,
    pub schema: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSettings {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeSettings {
    fn default() -> Self {
        TreeSettings { max_depth: 10, min_leaf: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings { n_trees: 100, max_depth: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for NeuralSettings {
    fn default() -> Self {
        NeuralSettings { hidden: 32, epochs: 400, lr: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub kinds: Vec<ModelKind>,
    pub tree: TreeSettings,
    pub forest: ForestSettings,
    pub neural: NeuralSettings,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kinds: vec![ModelKind::Tree, ModelKind::Forest, ModelKind::Neural],
            tree: TreeSettings::default(),
            forest: ForestSettings::default(),
            neural: NeuralSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowingSpheresSettings {
    pub gamma: f64,
    pub eta0: f64,
    pub samples_per_shell: usize,
}

impl Default for GrowingSpheresSettings {
    fn default() -> Self {
        GrowingSpheresSettings { gamma: 1.0, eta0: 0.1, samples_per_shell: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiceSettings {
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for DiceSettings {
    fn default() -> Self {
        DiceSettings { k: 4, lambda1: 0.5, lambda2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrototypeSettings {
    pub c: f64,
    pub beta: f64,
    pub theta: f64,
    pub k_neighbors: usize,
}

impl Default for PrototypeSettings {
    fn default() -> Self {
        PrototypeSettings { c: 1.0, beta: 0.1, theta: 0.1, k_neighbors: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmSection {
    pub ids: Vec<Algorithm>,
    pub growing_spheres: GrowingSpheresSettings,
    pub dice: DiceSettings,
    pub prototype: PrototypeSettings,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        AlgorithmSection {
            ids: Algorithm::ALL.to_vec(),
            growing_spheres: GrowingSpheresSettings::default(),
            dice: DiceSettings::default(),
            prototype: PrototypeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub models: ModelSection,
    #[serde(default)]
    pub algorithms: AlgorithmSection,
    #[serde(default = "default_n_instances")]
    pub n_instances: usize,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    pub output_dir: PathBuf,
}

fn default_n_instances() -> usize {
    20
}
fn default_n_runs() -> usize {
    5
}
fn default_seed() -> u64 {
    42
}
fn default_split_fraction() -> f64 {
    0.8
}
fn default_budget() -> usize {
    crate::cf::DEFAULT_BUDGET
}

impl BenchConfig {
    /// Parses the file and resolves relative paths against its directory.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: BenchConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &PathBuf| {
            if p.is_relative() {
                base.join(p)
            } else {
                p.clone()
            }
        };
        for entry in &mut config.datasets {
            entry.csv = resolve(&entry.csv);
            entry.schema = resolve(&entry.schema);
        }
        config.output_dir = resolve(&config.output_dir);
        config.validate()?;
        Ok(config)
    }

    /// Checks protocol parameters and algorithm/dataset compatibility:
    /// generators restricted to numerical schemas are rejected for datasets
    /// whose schema contains categorical features.
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::InvalidConfig("no datasets configured".into()));
        }
        if self.models.kinds.is_empty() {
            return Err(Error::InvalidConfig("no model kinds configured".into()));
        }
        if self.algorithms.ids.is_empty() {
            return Err(Error::InvalidConfig("no algorithms configured".into()));
        }
        if self.n_instances == 0 || self.n_runs == 0 {
            return Err(Error::InvalidConfig(
                "n_instances and n_runs must be positive".into(),
            ));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig("split_fraction must be in (0,1)".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for entry in &self.datasets {
            if !seen.insert(&entry.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate dataset name '{}'",
                    entry.name
                )));
            }
            let schema = FeatureSchema::from_json_file(&entry.schema)?;
            if !schema.is_numeric_only() {
                for algorithm in &self.algorithms.ids {
                    if !algorithm.handles_categorical() {
                        return Err(Error::InvalidConfig(format!(
                            "algorithm '{algorithm}' only supports numerical schemas, \
                             but dataset '{}' has categorical features",
                            entry.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
