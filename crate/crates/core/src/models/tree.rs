//! CART decision tree with Gini impurity.
//!
//! Determinism rules: candidate thresholds are midpoints between consecutive
//! sorted unique feature values; ties between splits are broken by the lowest
//! column index, then the lowest threshold. Routing is left iff
//! `x[feature] <= threshold`.

use ndarray::Array2;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 10, min_leaf: 3, mtry: None }
    }
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [u8],
    params: TreeParams,
    nodes: Vec<TreeNode>,
    rng: Option<&'a mut ChaCha8Rng>,
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<'a> Builder<'a> {
    fn class_counts(&self, rows: &[usize]) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for &i in rows {
            counts[self.y[i] as usize] += 1;
        }
        counts
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match (self.params.mtry, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut picked: Vec<usize> = sample(rng, p, m).into_iter().collect();
                picked.sort_unstable();
                picked
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let total = self.class_counts(rows);
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        for feature in self.candidate_features() {
            let mut pairs: Vec<(f64, u8)> =
                rows.iter().map(|&i| (self.x[[i, feature]], self.y[i])).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left = [0usize; 2];
            let mut k = 0;
            while k < n {
                // advance over a run of equal values
                let value = pairs[k].0;
                while k < n && pairs[k].0 == value {
                    left[pairs[k].1 as usize] += 1;
                    k += 1;
                }
                if k == n {
                    break;
                }
                let n_left = left[0] + left[1];
                let n_right = n - n_left;
                if n_left < self.params.min_leaf || n_right < self.params.min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let score = (n_left as f64 * gini(left) + n_right as f64 * gini(right))
                    / n as f64;
                if best.as_ref().map_or(true, |b| score < b.score - 1e-12) {
                    let threshold = 0.5 * (value + pairs[k].0);
                    best = Some(BestSplit { feature, threshold, score });
                }
            }
        }
        // A split must actually reduce impurity.
        let parent = gini(total);
        best.filter(|b| b.score < parent - 1e-12)
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let counts = self.class_counts(rows);
        let id = self.nodes.len();
        self.nodes.push(TreeNode { id, kind: NodeKind::Leaf { counts } });

        if depth >= self.params.max_depth
            || counts[0] == 0
            || counts[1] == 0
            || rows.len() < 2 * self.params.min_leaf
        {
            return id;
        }
        let Some(split) = self.best_split(rows) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        if left_rows.is_empty() || right_rows.is_empty() {
            return id;
        }
        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        self.nodes[id].kind = NodeKind::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    pub fn fit(
        x: &Array2<f64>,
        y: &[u8],
        rows: &[usize],
        params: TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        assert!(!rows.is_empty(), "training partition is empty");
        let mut builder = Builder { x, y, params, nodes: Vec::new(), rng };
        builder.build(rows, 0);
        DecisionTree { nodes: builder.nodes, n_features: x.ncols() }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Leaf reached by routing `x` from the root, with the node ids visited.
    pub fn route(&self, x: &[f64]) -> (usize, Vec<usize>) {
        let mut id = 0;
        let mut visited = vec![0];
        loop {
            match &self.nodes[id].kind {
                NodeKind::Leaf { .. } => return (id, visited),
                NodeKind::Split { feature, threshold, left, right } => {
                    id = if x[*feature] <= *threshold { *left } else { *right };
                    visited.push(id);
                }
            }
        }
    }

    pub fn leaf_proba(&self, leaf_id: usize) -> [f64; 2] {
        match &self.nodes[leaf_id].kind {
            NodeKind::Leaf { counts } => {
                let n = (counts[0] + counts[1]) as f64;
                if n == 0.0 {
                    [0.5, 0.5]
                } else {
                    [counts[0] as f64 / n, counts[1] as f64 / n]
                }
            }
            NodeKind::Split { .. } => panic!("node {leaf_id} is not a leaf"),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let (leaf, _) = self.route(x);
        self.leaf_proba(leaf)
    }

    /// Maximum root-to-leaf depth.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Stable structural fingerprint, used to detect comparisons between
    /// paths extracted from different trees.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100000001b3);
        };
        for node in &self.nodes {
            mix(node.id as u64);
            match &node.kind {
                NodeKind::Leaf { counts } => {
                    mix(counts[0] as u64);
                    mix(counts[1] as u64);
                }
                NodeKind::Split { feature, threshold, left, right } => {
                    mix(*feature as u64);
                    mix(threshold.to_bits());
                    mix(*left as u64);
                    mix(*right as u64);
                }
            }
        }
        h
    }
}
