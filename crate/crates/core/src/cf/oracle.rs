//! Exact minimal-distance counterfactual for a decision tree.
//!
//! Every leaf of the target class defines an axis-aligned box; clipping the
//! instance into a box gives the closest point of that box under both L1 and
//! L2, so scanning all target leaves yields the provably minimal-distance
//! counterfactual. Used as the ground-truth baseline the sampled generators
//! are compared against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DecisionTree, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

/// Closest point (under `norm`) to `x` whose tree prediction is
/// `target_class`. Exact by construction.
pub fn tree_oracle_cf(x: &[f64], tree: &DecisionTree, target_class: u8, norm: Norm) -> Result<Vec<f64>> {
    if x.len() != tree.n_features() {
        return Err(Error::DimensionMismatch { expected: tree.n_features(), got: x.len() });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    // DFS with the box constraints accumulated along the path: lower bounds
    // are exclusive (right branch means x[j] > t), upper bounds inclusive.
    let mut stack = vec![(
        0usize,
        vec![f64::NEG_INFINITY; x.len()],
        vec![f64::INFINITY; x.len()],
    )];
    while let Some((id, lo, hi)) = stack.pop() {
        match &tree.nodes()[id].kind {
            NodeKind::Leaf { counts } => {
                let class = if counts[0] >= counts[1] { 0u8 } else { 1 };
                if class != target_class {
                    continue;
                }
                let mut point = Vec::with_capacity(x.len());
                for j in 0..x.len() {
                    let mut v = x[j].min(hi[j]);
                    if v <= lo[j] {
                        v = lo[j].next_up();
                    }
                    point.push(v);
                }
                let dist = match norm {
                    Norm::L1 => point.iter().zip(x).map(|(a, b)| (a - b).abs()).sum(),
                    Norm::L2 => point
                        .iter()
                        .zip(x)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                };
                if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                    best = Some((dist, point));
                }
            }
            NodeKind::Split { feature, threshold, left, right } => {
                // push right first so the left child is explored first
                let mut lo_right = lo.clone();
                lo_right[*feature] = lo_right[*feature].max(*threshold);
                stack.push((*right, lo_right, hi.clone()));
                let mut hi_left = hi;
                hi_left[*feature] = hi_left[*feature].min(*threshold);
                stack.push((*left, lo, hi_left));
            }
        }
    }
    match best {
        Some((_, point)) => Ok(point),
        None => Err(Error::NoTargetLeaf { class: target_class }),
    }
}

/// Oracle distance to the nearest target-class region.
pub fn tree_oracle_distance(x: &[f64], tree: &DecisionTree, target_class: u8, norm: Norm) -> Result<f64> {
    let point = tree_oracle_cf(x, tree, target_class, norm)?;
    Ok(match norm {
        Norm::L1 => point.iter().zip(x).map(|(a, b)| (a - b).abs()).sum(),
        Norm::L2 => point
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Predictor, TreeParams};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn depth1_tree() -> DecisionTree {
        let x = ndarray::array![[0.0], [1.0]];
        let y = [0u8, 1];
        DecisionTree::fit(
            &x,
            &y,
            &[0, 1],
            TreeParams { max_depth: 1, min_leaf: 1, mtry: None },
            None,
        )
    }

    #[test]
    fn instance_inside_target_box_returns_itself() {
        let tree = depth1_tree();
        let point = tree_oracle_cf(&[0.9], &tree, 1, Norm::L2).unwrap();
        assert_eq!(point, vec![0.9]);
        assert_eq!(tree_oracle_distance(&[0.9], &tree, 1, Norm::L2).unwrap(), 0.0);
    }

    #[test]
    fn depth1_clip_lands_just_across_threshold() {
        let tree = depth1_tree();
        let point = tree_oracle_cf(&[0.3], &tree, 1, Norm::L2).unwrap();
        assert_eq!(point[0], 0.5f64.next_up());
        let p = Predictor::Tree(tree);
        assert_eq!(p.predict_class(&point).unwrap(), 1);
    }

    #[test]
    fn missing_target_leaf_is_an_error() {
        let x = ndarray::array![[0.0], [1.0]];
        let y = [0u8, 0];
        let tree = DecisionTree::fit(&x, &y, &[0, 1], TreeParams::default(), None);
        assert!(matches!(
            tree_oracle_cf(&[0.5], &tree, 1, Norm::L2),
            Err(Error::NoTargetLeaf { class: 1 })
        ));
    }

    #[test]
    fn oracle_point_always_predicts_target_class_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for round in 0..20 {
            let n = 60;
            let d = 4;
            let flat: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
            let x = Array2::from_shape_vec((n, d), flat).unwrap();
            let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2) as u8).collect();
            let rows: Vec<usize> = (0..n).collect();
            let tree = DecisionTree::fit(
                &x,
                &y,
                &rows,
                TreeParams { max_depth: 5, min_leaf: 2, mtry: None },
                None,
            );
            let predictor = Predictor::Tree(tree.clone());
            for _ in 0..20 {
                let probe: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                for target in [0u8, 1] {
                    match tree_oracle_cf(&probe, &tree, target, Norm::L2) {
                        Ok(point) => {
                            assert_eq!(
                                predictor.predict_class(&point).unwrap(),
                                target,
                                "round {round}"
                            );
                        }
                        Err(Error::NoTargetLeaf { .. }) => {}
                        Err(e) => panic!("unexpected error {e:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_distance_never_exceeds_any_valid_point_distance() {
        // minimality: compare against random valid points
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 80;
        let d = 3;
        let flat: Vec<f64> = (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = Array2::from_shape_vec((n, d), flat).unwrap();
        let y: Vec<u8> = (0..n).map(|i| (x[[i, 0]] + x[[i, 1]] > 1.0) as u8).collect();
        let rows: Vec<usize> = (0..n).collect();
        let tree = DecisionTree::fit(
            &x,
            &y,
            &rows,
            TreeParams { max_depth: 4, min_leaf: 2, mtry: None },
            None,
        );
        let predictor = Predictor::Tree(tree.clone());
        let probe = vec![0.2, 0.2, 0.5];
        let target = 1u8;
        let oracle_l2 = tree_oracle_distance(&probe, &tree, target, Norm::L2).unwrap();
        let oracle_l1 = tree_oracle_distance(&probe, &tree, target, Norm::L1).unwrap();
        let mut checked = 0;
        while checked < 200 {
            let cand: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            if predictor.predict_class(&cand).unwrap() != target {
                continue;
            }
            checked += 1;
            let l2: f64 = cand
                .iter()
                .zip(&probe)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let l1: f64 = cand.iter().zip(&probe).map(|(a, b)| (a - b).abs()).sum();
            assert!(l2 >= oracle_l2 - 1e-9);
            assert!(l1 >= oracle_l1 - 1e-9);
        }
    }
}
