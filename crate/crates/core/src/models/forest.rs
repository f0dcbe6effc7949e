//! Random forest: bootstrap-sampled CART trees with per-split random
//! feature subsets; probabilities are the mean of the trees' leaf
//! probabilities.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::models::tree::{DecisionTree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Feature subset size per split; `None` means ceil(sqrt(p)).
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 16,
            min_leaf: 1,
            mtry: None,
            bootstrap: true,
        }
    }
}

impl RandomForest {
    pub fn fit(
        x: &Array2<f64>,
        y: &[u8],
        rows: &[usize],
        params: ForestParams,
        seed: u64,
    ) -> Self {
        assert!(params.n_trees >= 1, "forest needs at least one tree");
        assert!(!rows.is_empty(), "training partition is empty");
        let p = x.ncols();
        let mtry = params
            .mtry
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            mtry: Some(mtry),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let sample_rows: Vec<usize> = if params.bootstrap {
                (0..rows.len())
                    .map(|_| rows[rng.random_range(0..rows.len())])
                    .collect()
            } else {
                rows.to_vec()
            };
            trees.push(DecisionTree::fit(x, y, &sample_rows, tree_params, Some(&mut rng)));
        }
        RandomForest { trees, n_features: p }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let mut acc = [0.0, 0.0];
        for tree in &self.trees {
            let p = tree.predict_proba(x);
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let k = self.trees.len() as f64;
        [acc[0] / k, acc[1] / k]
    }
}
