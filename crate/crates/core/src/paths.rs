//! Decision-path extraction and comparison for tree predictors: where the
//! counterfactual's root-to-leaf path diverges from the instance's, which
//! raw features changed, and whether any of them were immutable.

use serde::{Deserialize, Serialize};

use crate::cf::Algorithm;
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::models::{NodeKind, Predictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub node_id: usize,
    pub feature_index: usize,
    pub feature_name: String,
    pub threshold: f64,
    pub went_left: bool,
    /// Value of the routed instance at this feature (scaled encoded space).
    pub feature_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub steps: Vec<PathStep>,
    pub leaf_class: u8,
    pub leaf_id: usize,
    tree_fingerprint: u64,
}

impl DecisionPath {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }
}

/// Root-to-leaf trace of `x` through a decision tree.
pub fn extract_path(predictor: &Predictor, x: &[f64], dataset: &EncodedDataset) -> Result<DecisionPath> {
    let tree = predictor.as_tree()?;
    if x.len() != tree.n_features() {
        return Err(Error::DimensionMismatch { expected: tree.n_features(), got: x.len() });
    }
    let mut steps = Vec::new();
    let mut id = 0usize;
    loop {
        match &tree.nodes()[id].kind {
            NodeKind::Leaf { counts } => {
                let leaf_class = if counts[0] >= counts[1] { 0u8 } else { 1 };
                return Ok(DecisionPath {
                    steps,
                    leaf_class,
                    leaf_id: id,
                    tree_fingerprint: tree.fingerprint(),
                });
            }
            NodeKind::Split { feature, threshold, left, right } => {
                let went_left = x[*feature] <= *threshold;
                steps.push(PathStep {
                    node_id: id,
                    feature_index: *feature,
                    feature_name: dataset.layout().group_of(*feature).name.clone(),
                    threshold: *threshold,
                    went_left,
                    feature_value: x[*feature],
                });
                id = if went_left { *left } else { *right };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangedFeature {
    pub name: String,
    /// Raw-space values (unscaled numericals; level index for categoricals).
    pub old: f64,
    pub new: f64,
    pub immutable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDiff {
    pub divergence_depth: usize,
    pub shared_prefix: Vec<PathStep>,
    pub x_suffix: Vec<PathStep>,
    pub cf_suffix: Vec<PathStep>,
    pub changed_features: Vec<ChangedFeature>,
    pub immutable_violations: Vec<String>,
}

/// Compares the instance's and the counterfactual's decision paths through
/// the same tree. Divergence depth is the length of the longest common
/// prefix of (node id, branch) pairs.
pub fn compare_paths(
    path_x: &DecisionPath,
    path_cf: &DecisionPath,
    x: &[f64],
    cf: &[f64],
    dataset: &EncodedDataset,
) -> Result<PathDiff> {
    if path_x.tree_fingerprint != path_cf.tree_fingerprint {
        return Err(Error::DifferentTrees);
    }
    let mut divergence_depth = 0;
    for (a, b) in path_x.steps.iter().zip(&path_cf.steps) {
        if a.node_id == b.node_id && a.went_left == b.went_left {
            divergence_depth += 1;
        } else {
            break;
        }
    }
    let shared_prefix = path_x.steps[..divergence_depth].to_vec();
    let x_suffix = path_x.steps[divergence_depth..].to_vec();
    let cf_suffix = path_cf.steps[divergence_depth..].to_vec();

    let raw_x = dataset.decode(x)?;
    let raw_cf = dataset.decode(cf)?;
    let mut changed_features = Vec::new();
    let mut immutable_violations = Vec::new();
    for (spec, (a, b)) in dataset
        .schema()
        .features()
        .iter()
        .zip(raw_x.iter().zip(&raw_cf))
    {
        let (old, new) = (a.as_num(), b.as_num());
        if (old - new).abs() > 1e-9 {
            changed_features.push(ChangedFeature {
                name: spec.name.clone(),
                old,
                new,
                immutable: spec.immutable,
            });
            if spec.immutable {
                immutable_violations.push(spec.name.clone());
            }
        }
    }
    Ok(PathDiff {
        divergence_depth,
        shared_prefix,
        x_suffix,
        cf_suffix,
        changed_features,
        immutable_violations,
    })
}

/// One comparison row of the bias report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub instance_id: usize,
    pub run: usize,
    pub divergence_depth: usize,
    pub depth_x: usize,
    pub depth_cf: usize,
    pub n_changed: usize,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub rows: Vec<BiasRow>,
}

impl BiasReport {
    /// Aggregate immutable-violation counts per algorithm, in a stable order.
    pub fn violation_counts(&self) -> Vec<(Algorithm, usize)> {
        let mut counts: std::collections::BTreeMap<Algorithm, usize> = Default::default();
        for row in &self.rows {
            *counts.entry(row.algorithm).or_default() += row.violations.len();
        }
        counts.into_iter().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "dataset,algorithm,instance_id,run,divergence_depth,depth_x,depth_cf,n_changed,violations\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.dataset,
                r.algorithm,
                r.instance_id,
                r.run,
                r.divergence_depth,
                r.depth_x,
                r.depth_cf,
                r.n_changed,
                r.violations.join("|"),
            ));
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:<16} {:>8} {:>4} {:>10} {:>8} {:>9} {}\n",
            "dataset", "algorithm", "instance", "run", "divergence", "changed", "depth(x)", "violations"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12} {:<16} {:>8} {:>4} {:>10} {:>8} {:>9} {}\n",
                r.dataset,
                r.algorithm.to_string(),
                r.instance_id,
                r.run,
                r.divergence_depth,
                r.n_changed,
                r.depth_x,
                if r.violations.is_empty() {
                    "-".to_string()
                } else {
                    r.violations.join("|")
                },
            ));
        }
        out.push('\n');
        for (algorithm, count) in self.violation_counts() {
            out.push_str(&format!(
                "total immutable violations [{algorithm}]: {count}\n"
            ));
        }
        out
    }
}

/// Builds the per-(algorithm, instance, run) bias rows for a tree predictor.
/// `results` supplies, per outcome, the representative candidate compared
/// against its instance.
pub fn bias_report(
    dataset_name: &str,
    dataset: &EncodedDataset,
    predictor: &Predictor,
    results: &[(Algorithm, usize, usize, Vec<f64>, Vec<f64>)],
) -> Result<BiasReport> {
    let mut rows = Vec::new();
    for (algorithm, instance_id, run, x, candidate) in results {
        let path_x = extract_path(predictor, x, dataset)?;
        let path_cf = extract_path(predictor, candidate, dataset)?;
        let diff = compare_paths(&path_x, &path_cf, x, candidate, dataset)?;
        rows.push(BiasRow {
            dataset: dataset_name.to_string(),
            algorithm: *algorithm,
            instance_id: *instance_id,
            run: *run,
            divergence_depth: diff.divergence_depth,
            depth_x: path_x.depth(),
            depth_cf: path_cf.depth(),
            n_changed: diff.changed_features.len(),
            violations: diff.immutable_violations,
        });
    }
    Ok(BiasReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, FeatureSpec, RawTable, RawValue};
    use crate::models::{DecisionTree, TreeParams};
    use ndarray::array;

    fn dataset_2d() -> EncodedDataset {
        let schema = FeatureSchema::new(
            "y",
            vec![
                FeatureSpec::numerical("a"),
                FeatureSpec::numerical("b").immutable(),
            ],
        )
        .unwrap();
        let rows: Vec<Vec<RawValue>> = vec![
            vec![RawValue::Num(0.0), RawValue::Num(0.0)],
            vec![RawValue::Num(1.0), RawValue::Num(1.0)],
        ];
        EncodedDataset::encode(&RawTable { rows, labels: vec![0, 1] }, &schema).unwrap()
    }

    fn single_leaf_predictor() -> Predictor {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let y = [1u8, 1];
        Predictor::Tree(DecisionTree::fit(
            &x,
            &y,
            &[0, 1],
            TreeParams::default(),
            None,
        ))
    }

    fn depth1_predictor() -> Predictor {
        let x = array![[0.0, 0.0], [1.0, 1.0]];
        let y = [0u8, 1];
        Predictor::Tree(DecisionTree::fit(
            &x,
            &y,
            &[0, 1],
            TreeParams { max_depth: 1, min_leaf: 1, mtry: None },
            None,
        ))
    }

    #[test]
    fn single_leaf_tree_gives_empty_path() {
        let ds = dataset_2d();
        let path = extract_path(&single_leaf_predictor(), &[0.5, 0.5], &ds).unwrap();
        assert_eq!(path.depth(), 0);
        assert_eq!(path.leaf_class, 1);
    }

    #[test]
    fn depth1_path_records_branch() {
        let ds = dataset_2d();
        let predictor = depth1_predictor();
        let path = extract_path(&predictor, &[0.2, 0.9], &ds).unwrap();
        assert_eq!(path.depth(), 1);
        assert!(path.steps[0].went_left);
        assert_eq!(path.leaf_class, 0);
        assert_eq!(path.leaf_class, predictor.predict_class(&[0.2, 0.9]).unwrap());
    }

    #[test]
    fn non_tree_predictor_is_rejected() {
        let ds = dataset_2d();
        let net = crate::models::NeuralNet::init(2, 4, 1);
        let err = extract_path(&Predictor::Neural(net), &[0.1, 0.1], &ds).unwrap_err();
        assert!(matches!(err, Error::NotATree { .. }));
    }

    #[test]
    fn identical_paths_share_full_depth() {
        let ds = dataset_2d();
        let predictor = depth1_predictor();
        let x = [0.2, 0.4];
        let path = extract_path(&predictor, &x, &ds).unwrap();
        let diff = compare_paths(&path, &path, &x, &x, &ds).unwrap();
        assert_eq!(diff.divergence_depth, path.depth());
        assert!(diff.x_suffix.is_empty());
        assert!(diff.cf_suffix.is_empty());
        assert!(diff.changed_features.is_empty());
    }

    #[test]
    fn divergence_and_immutable_violation_detected() {
        let ds = dataset_2d();
        let predictor = depth1_predictor();
        let x = [0.2, 0.4];
        let cf = [0.9, 0.6]; // crosses the split AND moves immutable 'b'
        let path_x = extract_path(&predictor, &x, &ds).unwrap();
        let path_cf = extract_path(&predictor, &cf, &ds).unwrap();
        let diff = compare_paths(&path_x, &path_cf, &x, &cf, &ds).unwrap();
        assert_eq!(diff.divergence_depth, 0);
        assert_eq!(diff.changed_features.len(), 2);
        assert_eq!(diff.immutable_violations, vec!["b".to_string()]);
        // every reported violation corresponds to a real raw-space change
        for v in &diff.immutable_violations {
            let feature = diff
                .changed_features
                .iter()
                .find(|c| &c.name == v)
                .expect("violation not in changed features");
            assert!((feature.old - feature.new).abs() > 1e-9);
        }
    }

    #[test]
    fn swapping_arguments_swaps_suffixes_and_keeps_depth() {
        let ds = dataset_2d();
        let predictor = depth1_predictor();
        let x = [0.2, 0.4];
        let cf = [0.9, 0.4];
        let px = extract_path(&predictor, &x, &ds).unwrap();
        let pc = extract_path(&predictor, &cf, &ds).unwrap();
        let ab = compare_paths(&px, &pc, &x, &cf, &ds).unwrap();
        let ba = compare_paths(&pc, &px, &cf, &x, &ds).unwrap();
        assert_eq!(ab.divergence_depth, ba.divergence_depth);
        assert_eq!(ab.x_suffix, ba.cf_suffix);
        assert_eq!(ab.cf_suffix, ba.x_suffix);
    }

    #[test]
    fn paths_from_different_trees_are_rejected() {
        let ds = dataset_2d();
        let p1 = depth1_predictor();
        let p2 = single_leaf_predictor();
        let x = [0.2, 0.4];
        let a = extract_path(&p1, &x, &ds).unwrap();
        let b = extract_path(&p2, &x, &ds).unwrap();
        assert!(matches!(
            compare_paths(&a, &b, &x, &x, &ds),
            Err(Error::DifferentTrees)
        ));
    }

    #[test]
    fn path_replay_reproduces_predictions_on_a_grid() {
        let ds = dataset_2d();
        let predictor = depth1_predictor();
        for i in 0..20 {
            for j in 0..20 {
                let x = [i as f64 / 19.0, j as f64 / 19.0];
                let path = extract_path(&predictor, &x, &ds).unwrap();
                assert_eq!(path.leaf_class, predictor.predict_class(&x).unwrap());
                // replay the recorded branches
                for step in &path.steps {
                    assert_eq!(step.went_left, x[step.feature_index] <= step.threshold);
                }
            }
        }
    }

    #[test]
    fn empty_result_set_gives_empty_report() {
        let ds = dataset_2d();
        let report = bias_report("toy", &ds, &depth1_predictor(), &[]).unwrap();
        assert!(report.rows.is_empty());
        assert!(report.violation_counts().is_empty());
    }
}
