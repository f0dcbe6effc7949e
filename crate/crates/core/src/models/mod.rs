//! The three predictor families behind one probability-oriented interface.

pub mod forest;
pub mod neural;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};

pub use forest::{ForestParams, RandomForest};
pub use neural::{NeuralNet, NeuralParams};
pub use tree::{DecisionTree, NodeKind, TreeNode, TreeParams};

/// Central-difference step for gradients of piecewise-constant models.
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Forest,
    Neural,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Tree => write!(f, "tree"),
            ModelKind::Forest => write!(f, "forest"),
            ModelKind::Neural => write!(f, "neural"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(ModelKind::Tree),
            "forest" => Ok(ModelKind::Forest),
            "neural" => Ok(ModelKind::Neural),
            other => Err(Error::InvalidConfig(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predictor {
    Tree(DecisionTree),
    Forest(RandomForest),
    Neural(NeuralNet),
}

impl Predictor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Predictor::Tree(_) => ModelKind::Tree,
            Predictor::Forest(_) => ModelKind::Forest,
            Predictor::Neural(_) => ModelKind::Neural,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Predictor::Tree(t) => t.n_features(),
            Predictor::Forest(f) => f.n_features(),
            Predictor::Neural(n) => n.n_features(),
        }
    }

    pub fn as_tree(&self) -> Result<&DecisionTree> {
        match self {
            Predictor::Tree(t) => Ok(t),
            other => Err(Error::NotATree { got: other.kind().to_string() }),
        }
    }

    /// Class probabilities `[p(0), p(1)]`; they sum to 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(match self {
            Predictor::Tree(t) => t.predict_proba(x),
            Predictor::Forest(f) => f.predict_proba(x),
            Predictor::Neural(n) => n.predict_proba(x),
        })
    }

    /// Hard label: argmax of `predict_proba`, ties resolved to class 0.
    pub fn predict_class(&self, x: &[f64]) -> Result<u8> {
        let p = self.predict_proba(x)?;
        Ok(if p[0] >= p[1] { 0 } else { 1 })
    }

    /// Gradient of p(target_class) with respect to the input: analytic for
    /// the network, central finite differences (step 1e-4) for trees and
    /// forests. Piecewise-constant surfaces yield the zero vector almost
    /// everywhere; callers must handle that case.
    pub fn soft_gradient(&self, x: &[f64], target_class: u8) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        match self {
            Predictor::Neural(n) => {
                let mut g = n.input_gradient(x);
                if target_class == 0 {
                    for v in &mut g {
                        *v = -*v;
                    }
                }
                Ok(g)
            }
            _ => {
                let mut g = vec![0.0; x.len()];
                let mut probe = x.to_vec();
                for j in 0..x.len() {
                    probe[j] = x[j] + FD_STEP;
                    let up = self.predict_proba(&probe)?[target_class as usize];
                    probe[j] = x[j] - FD_STEP;
                    let down = self.predict_proba(&probe)?[target_class as usize];
                    probe[j] = x[j];
                    g[j] = (up - down) / (2.0 * FD_STEP);
                }
                Ok(g)
            }
        }
    }

    /// Predictor evaluations one `soft_gradient` call costs.
    pub fn gradient_eval_cost(&self) -> usize {
        match self {
            Predictor::Neural(_) => 1,
            _ => 2 * self.n_features(),
        }
    }
}

/// Versioned structured snapshot so benchmark runs can be resumed.
#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    model: Predictor,
}

const SNAPSHOT_VERSION: u32 = 1;

impl Predictor {
    pub fn save(&self, path: &Path) -> Result<()> {
        let snap = Snapshot { version: SNAPSHOT_VERSION, model: self.clone() };
        let text = serde_json::to_string(&snap)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snap: Snapshot = serde_json::from_str(&text)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                expected: SNAPSHOT_VERSION,
                got: snap.version,
            });
        }
        Ok(snap.model)
    }
}

pub fn train_tree(
    data: &EncodedDataset,
    max_depth: usize,
    min_leaf: usize,
    _seed: u64,
) -> Predictor {
    // CART with the deterministic tie-break rules needs no randomness.
    let params = TreeParams { max_depth, min_leaf, mtry: None };
    Predictor::Tree(DecisionTree::fit(data.x(), data.y(), data.train_idx(), params, None))
}

pub fn train_forest(
    data: &EncodedDataset,
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Predictor {
    let params = ForestParams { n_trees, max_depth, ..ForestParams::default() };
    Predictor::Forest(RandomForest::fit(data.x(), data.y(), data.train_idx(), params, seed))
}

pub fn train_neural(
    data: &EncodedDataset,
    hidden: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Predictor> {
    let params = NeuralParams { hidden, epochs, lr, ..NeuralParams::default() };
    Ok(Predictor::Neural(NeuralNet::fit(
        data.x(),
        data.y(),
        data.train_idx(),
        params,
        seed,
    )?))
}

/// Test-set accuracy of a trained predictor.
pub fn test_accuracy(predictor: &Predictor, data: &EncodedDataset) -> Result<f64> {
    let test = data.test_idx();
    if test.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0usize;
    for &i in test {
        let x = data.row(i).to_vec();
        if predictor.predict_class(&x)? == data.y()[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn leaf_tree(counts: [usize; 2]) -> Predictor {
        // single-leaf tree built from a constant-label fit
        let n = counts[0] + counts[1];
        let x = ndarray::Array2::zeros((n, 1));
        let y: Vec<u8> = std::iter::repeat_n(0u8, counts[0])
            .chain(std::iter::repeat_n(1u8, counts[1]))
            .collect();
        let rows: Vec<usize> = (0..n).collect();
        let tree = DecisionTree::fit(
            &x,
            &y,
            &rows,
            TreeParams { max_depth: 0, min_leaf: 1, mtry: None },
            None,
        );
        Predictor::Tree(tree)
    }

    #[test]
    fn single_leaf_counts_3_1_give_probabilities() {
        let p = leaf_tree([3, 1]).predict_proba(&[0.0]).unwrap();
        assert_eq!(p, [0.75, 0.25]);
    }

    #[test]
    fn probabilities_are_nonnegative_and_sum_to_one() {
        use rand::{Rng, SeedableRng};
        let x = array![
            [0.1, 0.9],
            [0.2, 0.8],
            [0.8, 0.2],
            [0.9, 0.1],
            [0.4, 0.6],
            [0.6, 0.4]
        ];
        let y = [0u8, 0, 1, 1, 0, 1];
        let rows: Vec<usize> = (0..6).collect();
        let ds_predictors = vec![
            Predictor::Tree(DecisionTree::fit(
                &x,
                &y,
                &rows,
                TreeParams { max_depth: 3, min_leaf: 1, mtry: None },
                None,
            )),
            Predictor::Forest(RandomForest::fit(
                &x,
                &y,
                &rows,
                ForestParams { n_trees: 10, max_depth: 3, min_leaf: 1, mtry: None, bootstrap: true },
                5,
            )),
            Predictor::Neural(
                NeuralNet::fit(
                    &x,
                    &y,
                    &rows,
                    NeuralParams { hidden: 6, epochs: 20, lr: 0.1, batch: 3 },
                    5,
                )
                .unwrap(),
            ),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for predictor in &ds_predictors {
            for _ in 0..1000 {
                let probe = vec![rng.random_range(-0.5..1.5), rng.random_range(-0.5..1.5)];
                let p = predictor.predict_proba(&probe).unwrap();
                assert!(p[0] >= 0.0 && p[1] >= 0.0);
                assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ties_predict_class_0() {
        let p = leaf_tree([2, 2]);
        assert_eq!(p.predict_class(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = leaf_tree([1, 1]);
        assert!(matches!(
            p.predict_proba(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn soft_gradient_zero_away_from_thresholds() {
        let x = array![[0.0], [1.0]];
        let y = [0u8, 1];
        let tree = DecisionTree::fit(
            &x,
            &y,
            &[0, 1],
            TreeParams { max_depth: 1, min_leaf: 1, mtry: None },
            None,
        );
        let p = Predictor::Tree(tree);
        // far from the 0.5 threshold, both central probes hit the same leaf
        let g = p.soft_gradient(&[0.1], 1).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn soft_gradient_zero_for_constant_predictor() {
        let p = leaf_tree([4, 0]);
        assert_eq!(p.soft_gradient(&[0.3], 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn neural_soft_gradient_matches_finite_differences() {
        let net = NeuralNet::init(3, 8, 21);
        let p = Predictor::Neural(net.clone());
        let x = vec![0.2, 0.5, 0.8];
        for target in [0u8, 1] {
            let g = p.soft_gradient(&x, target).unwrap();
            let h = 1e-6;
            for j in 0..3 {
                let mut plus = x.clone();
                plus[j] += h;
                let mut minus = x.clone();
                minus[j] -= h;
                let fd = (p.predict_proba(&plus).unwrap()[target as usize]
                    - p.predict_proba(&minus).unwrap()[target as usize])
                    / (2.0 * h);
                let denom = fd.abs().max(g[j].abs()).max(1e-8);
                assert!((fd - g[j]).abs() / denom < 1e-4);
            }
        }
    }

    #[test]
    fn snapshot_round_trip_preserves_model() {
        let p = leaf_tree([3, 1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        p.save(&path).unwrap();
        let loaded = Predictor::load(&path).unwrap();
        assert_eq!(p, loaded);
    }

    #[test]
    fn snapshot_version_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let p = leaf_tree([1, 0]);
        let mut value = serde_json::to_value(Snapshot { version: 1, model: p }).unwrap();
        value["version"] = serde_json::json!(999);
        std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        assert!(matches!(
            Predictor::load(&path),
            Err(Error::SnapshotVersion { got: 999, .. })
        ));
    }
}
