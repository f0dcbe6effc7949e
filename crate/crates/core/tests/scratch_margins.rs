use std::path::PathBuf;

use cfbench_core::bench::seed_for;
use cfbench_core::data::prepare_dataset;
use cfbench_core::models::{self, ModelKind};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn margin_matrix() {
    for name in ["diabetes", "breast_cancer"] {
        let ds = prepare_dataset(
            &data_dir().join(format!("{name}.csv")),
            &data_dir().join(format!("{name}.schema.json")),
            0.8,
            seed_for(42, &["split", name]),
        )
        .unwrap();
        let tseed = seed_for(42, &["train", name, "tree"]);
        let nseed = seed_for(42, &["train", name, "neural"]);
        let fseed = seed_for(42, &["train", name, "forest"]);
        for min_leaf in [5usize, 3, 2] {
            let tree = models::train_tree(&ds, 10, min_leaf, tseed);
            println!(
                "{name} tree min_leaf={min_leaf}: {:.3}",
                models::test_accuracy(&tree, &ds).unwrap()
            );
        }
        for epochs in [200usize, 300, 400] {
            let nn = models::train_neural(&ds, 32, epochs, 0.01, nseed).unwrap();
            println!(
                "{name} neural epochs={epochs}: {:.3}",
                models::test_accuracy(&nn, &ds).unwrap()
            );
        }
        let forest = models::train_forest(&ds, 100, 16, fseed);
        println!(
            "{name} forest(16,1): {:.3}",
            models::test_accuracy(&forest, &ds).unwrap()
        );
        let _ = ModelKind::Tree;
    }
}
