use std::path::PathBuf;

use cfbench_core::data::prepare_dataset;
use cfbench_core::models;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn scratch_accuracies() {
    for (name, label) in [("diabetes", "Outcome"), ("breast_cancer", "target")] {
        let _ = label;
        let ds = prepare_dataset(
            &data_dir().join(format!("{name}.csv")),
            &data_dir().join(format!("{name}.schema.json")),
            0.8,
            42,
        )
        .unwrap();
        let t0 = std::time::Instant::now();
        let tree = models::train_tree(&ds, 10, 5, 1);
        let t1 = std::time::Instant::now();
        let forest = models::train_forest(&ds, 100, 10, 1);
        let t2 = std::time::Instant::now();
        let neural = models::train_neural(&ds, 32, 200, 0.01, 1).unwrap();
        let t3 = std::time::Instant::now();
        println!(
            "{name}: tree={:.3} ({:?})  forest={:.3} ({:?})  neural={:.3} ({:?})",
            models::test_accuracy(&tree, &ds).unwrap(),
            t1 - t0,
            models::test_accuracy(&forest, &ds).unwrap(),
            t2 - t1,
            models::test_accuracy(&neural, &ds).unwrap(),
            t3 - t2,
        );
    }
}
