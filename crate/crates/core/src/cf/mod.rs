//! Instance-centric counterfactual generators.
//!
//! Each generator is a pure function of `(CfRequest, Predictor)`: given the
//! same request (including its seed) it returns the same outcome, so
//! requests can run in parallel safely.

pub mod dice;
pub mod growing_spheres;
pub mod oracle;
mod perturb;
pub mod prototype;
pub mod watcher;

use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, EncodedLayout};
use crate::error::{Error, Result};
use crate::models::Predictor;

pub use dice::{dpp_diversity, Dice};
pub use growing_spheres::GrowingSpheres;
pub use oracle::{tree_oracle_cf, Norm};
pub use prototype::{elastic_distance, soft_threshold, PrototypeCf};
pub use watcher::WatcherCf;

/// Default cap on predictor evaluations per request.
pub const DEFAULT_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Watcher,
    GrowingSpheres,
    Dice,
    Prototype,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Watcher,
        Algorithm::GrowingSpheres,
        Algorithm::Dice,
        Algorithm::Prototype,
    ];

    /// Whether the algorithm can process one-hot (categorical) columns.
    pub fn handles_categorical(&self) -> bool {
        matches!(self, Algorithm::Dice | Algorithm::Prototype)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Watcher => "watcher",
            Algorithm::GrowingSpheres => "growing_spheres",
            Algorithm::Dice => "dice",
            Algorithm::Prototype => "prototype",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "watcher" => Ok(Algorithm::Watcher),
            "growing_spheres" => Ok(Algorithm::GrowingSpheres),
            "dice" => Ok(Algorithm::Dice),
            "prototype" => Ok(Algorithm::Prototype),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// One counterfactual generation task over an encoded, scaled instance.
#[derive(Debug, Clone)]
pub struct CfRequest {
    pub x: Vec<f64>,
    pub y_target: u8,
    pub layout: EncodedLayout,
    pub immutable_mask: Vec<bool>,
    pub budget: usize,
    pub seed: u64,
}

impl CfRequest {
    /// Builds a request for one dataset row; the target class is the
    /// opposite of the predictor's current class.
    pub fn for_instance(
        dataset: &EncodedDataset,
        predictor: &Predictor,
        x: Vec<f64>,
        seed: u64,
        budget: usize,
    ) -> Result<Self> {
        let y_target = 1 - predictor.predict_class(&x)?;
        Ok(CfRequest {
            immutable_mask: dataset.immutable_mask(),
            layout: dataset.layout().clone(),
            x,
            y_target,
            budget,
            seed,
        })
    }

    /// Request over a plain numerical space, mainly for tests and sweeps.
    pub fn numeric(x: Vec<f64>, y_target: u8, seed: u64) -> Self {
        use crate::data::{FeatureSchema, FeatureSpec};
        let features: Vec<FeatureSpec> = (0..x.len())
            .map(|i| FeatureSpec::numerical(&format!("f{i}")))
            .collect();
        let layout = FeatureSchema::new("y", features).unwrap().layout();
        CfRequest {
            immutable_mask: vec![false; x.len()],
            layout,
            x,
            y_target,
            budget: DEFAULT_BUDGET,
            seed,
        }
    }

    pub fn validate(&self, predictor: &Predictor) -> Result<()> {
        let p = predictor.n_features();
        if self.x.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.x.len() });
        }
        if self.immutable_mask.len() != p || self.layout.width() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: self.immutable_mask.len(),
            });
        }
        Ok(())
    }
}

/// Result of one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualOutcome {
    pub found: bool,
    pub candidates: Vec<Vec<f64>>,
    pub evaluations: usize,
    pub seconds: f64,
    pub algorithm: Algorithm,
    /// Set when fewer candidates than requested were valid at exhaustion.
    pub partial: bool,
}

impl CounterfactualOutcome {
    pub fn not_found(algorithm: Algorithm, evaluations: usize) -> Self {
        CounterfactualOutcome {
            found: false,
            candidates: Vec::new(),
            evaluations,
            seconds: 0.0,
            algorithm,
            partial: false,
        }
    }
}

pub trait Generator: Send + Sync {
    fn algorithm(&self) -> Algorithm;
    fn generate(&self, request: &CfRequest, predictor: &Predictor) -> Result<CounterfactualOutcome>;
}

/// Predictor evaluation meter with a hard budget.
pub(crate) struct EvalSession<'a> {
    predictor: &'a Predictor,
    evaluations: usize,
    budget: usize,
}

impl<'a> EvalSession<'a> {
    pub fn new(predictor: &'a Predictor, budget: usize) -> Self {
        EvalSession { predictor, evaluations: 0, budget }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    /// `None` once the budget is exhausted.
    pub fn proba(&mut self, x: &[f64]) -> Option<[f64; 2]> {
        if self.evaluations >= self.budget {
            return None;
        }
        self.evaluations += 1;
        Some(self.predictor.predict_proba(x).expect("request validated"))
    }

    pub fn class(&mut self, x: &[f64]) -> Option<u8> {
        self.proba(x).map(|p| if p[0] >= p[1] { 0 } else { 1 })
    }

    pub fn gradient(&mut self, x: &[f64], target_class: u8) -> Option<Vec<f64>> {
        let cost = self.predictor.gradient_eval_cost();
        if self.evaluations + cost > self.budget {
            return None;
        }
        self.evaluations += cost;
        Some(self.predictor.soft_gradient(x, target_class).expect("request validated"))
    }
}

/// Clamps every coordinate into the scaled feature box [0,1].
pub(crate) fn clip01(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Snaps each one-hot group to its nearest valid vertex (argmax to 1, rest
/// to 0; ties to the lowest column).
pub(crate) fn project_one_hot(x: &mut [f64], layout: &EncodedLayout) {
    for group in layout.groups() {
        if !group.one_hot {
            continue;
        }
        let mut best = group.start;
        let mut best_v = f64::NEG_INFINITY;
        for c in group.columns() {
            if x[c] > best_v {
                best_v = x[c];
                best = c;
            }
        }
        for c in group.columns() {
            x[c] = if c == best { 1.0 } else { 0.0 };
        }
    }
}

/// Resets masked coordinates to the base instance's values.
pub(crate) fn freeze(x: &mut [f64], base: &[f64], mask: &[bool]) {
    for ((v, b), &frozen) in x.iter_mut().zip(base).zip(mask) {
        if frozen {
            *v = *b;
        }
    }
}
