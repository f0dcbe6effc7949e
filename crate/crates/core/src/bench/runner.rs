//! Benchmark orchestration over the (dataset x model x algorithm) grid.
//!
//! Every cell is an independent work unit with seeds derived from what the
//! cell is named, so results are reproducible, cells can run in parallel
//! without changing any numbers, and finished cells are resumed from disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::config::BenchConfig;
use crate::bench::report::{BenchmarkReport, CellFailure, ReportRow};
use crate::bench::seeds::seed_for;
use crate::cf::{
    Algorithm, CfRequest, CounterfactualOutcome, Dice, Generator, GrowingSpheres, PrototypeCf,
    WatcherCf,
};
use crate::data::{prepare_dataset, EncodedDataset};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricRecord};
use crate::models::{self, ModelKind, Predictor};

pub struct PreparedDataset {
    pub name: String,
    pub data: EncodedDataset,
    /// Sampled test rows, in sample order (the ordinal is the seed handle).
    pub instances: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub instance_ordinal: usize,
    pub instance_row: usize,
    pub run: usize,
    pub outcome: CounterfactualOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellMeta {
    seed: u64,
    n_instances: usize,
    n_runs: usize,
    budget: usize,
    instance_rows: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellFile {
    meta: CellMeta,
    outcomes: Vec<RunOutcome>,
}

pub fn prepare(config: &BenchConfig) -> Result<Vec<PreparedDataset>> {
    config
        .datasets
        .iter()
        .map(|entry| {
            let data = prepare_dataset(
                &entry.csv,
                &entry.schema,
                config.split_fraction,
                seed_for(config.seed, &["split", &entry.name]),
            )?;
            let instances = sample_instances(
                data.test_idx(),
                config.n_instances,
                seed_for(config.seed, &["instances", &entry.name]),
            );
            Ok(PreparedDataset { name: entry.name.clone(), data, instances })
        })
        .collect()
}

/// Uniform sample without replacement from the test partition.
fn sample_instances(test_idx: &[usize], n: usize, seed: u64) -> Vec<usize> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let take = n.min(test_idx.len());
    rand::seq::index::sample(&mut rng, test_idx.len(), take)
        .into_iter()
        .map(|i| test_idx[i])
        .collect()
}

pub fn train_model(
    config: &BenchConfig,
    data: &EncodedDataset,
    kind: ModelKind,
    seed: u64,
) -> Result<Predictor> {
    Ok(match kind {
        ModelKind::Tree => models::train_tree(
            data,
            config.models.tree.max_depth,
            config.models.tree.min_leaf,
            seed,
        ),
        ModelKind::Forest => models::train_forest(
            data,
            config.models.forest.n_trees,
            config.models.forest.max_depth,
            seed,
        ),
        ModelKind::Neural => models::train_neural(
            data,
            config.models.neural.hidden,
            config.models.neural.epochs,
            config.models.neural.lr,
            seed,
        )?,
    })
}

pub fn build_generator(
    config: &BenchConfig,
    data: &EncodedDataset,
    algorithm: Algorithm,
) -> Box<dyn Generator> {
    match algorithm {
        Algorithm::Watcher => Box::new(WatcherCf::new(data.mad_weights())),
        Algorithm::GrowingSpheres => {
            let s = config.algorithms.growing_spheres;
            Box::new(GrowingSpheres {
                gamma: s.gamma,
                eta0: s.eta0,
                samples_per_shell: s.samples_per_shell,
                ..GrowingSpheres::default()
            })
        }
        Algorithm::Dice => {
            let s = config.algorithms.dice;
            let mut dice = Dice::new(data.mad_weights()).with_k(s.k);
            dice.lambda1 = s.lambda1;
            dice.lambda2 = s.lambda2;
            Box::new(dice)
        }
        Algorithm::Prototype => {
            let s = config.algorithms.prototype;
            let mut proto = PrototypeCf::new(data);
            proto.c = s.c;
            proto.beta = s.beta;
            proto.theta = s.theta;
            proto.k_neighbors = s.k_neighbors;
            Box::new(proto)
        }
    }
}

/// Runs one cell's n_instances x n_runs generation tasks.
pub fn run_cell(
    config: &BenchConfig,
    prepared: &PreparedDataset,
    model: ModelKind,
    predictor: &Predictor,
    algorithm: Algorithm,
) -> Result<Vec<RunOutcome>> {
    let generator = build_generator(config, &prepared.data, algorithm);
    let mut outcomes = Vec::with_capacity(prepared.instances.len() * config.n_runs);
    let model_name = model.to_string();
    let algo_name = algorithm.to_string();
    for (ordinal, &row) in prepared.instances.iter().enumerate() {
        let x = prepared.data.row(row).to_vec();
        for run in 0..config.n_runs {
            let seed = seed_for(
                config.seed,
                &[
                    "run",
                    &prepared.name,
                    &model_name,
                    &algo_name,
                    &ordinal.to_string(),
                    &run.to_string(),
                ],
            );
            let request = CfRequest::for_instance(
                &prepared.data,
                predictor,
                x.clone(),
                seed,
                config.budget,
            )?;
            let outcome = generator.generate(&request, predictor)?;
            outcomes.push(RunOutcome { instance_ordinal: ordinal, instance_row: row, run, outcome });
        }
    }
    Ok(outcomes)
}

fn cell_path(out_dir: &Path, dataset: &str, model: ModelKind, algorithm: Algorithm) -> PathBuf {
    out_dir
        .join("cells")
        .join(format!("{dataset}__{model}__{algorithm}.json"))
}

/// Loads a finished cell if its metadata matches the current protocol.
fn load_cell(path: &Path, meta: &CellMeta) -> Option<Vec<RunOutcome>> {
    let text = std::fs::read_to_string(path).ok()?;
    let file: CellFile = serde_json::from_str(&text).ok()?;
    (file.meta == *meta).then_some(file.outcomes)
}

fn store_cell(path: &Path, meta: &CellMeta, outcomes: &[RunOutcome]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = CellFile { meta: meta.clone(), outcomes: outcomes.to_vec() };
    let text = serde_json::to_string(&file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The representative candidate of one outcome: the MAD-L1 closest one.
/// Multi-candidate outcomes enter scalar metric columns through it.
pub fn representative_candidate<'a>(
    outcome: &'a CounterfactualOutcome,
    x: &[f64],
    mad_weights: &[f64],
) -> Option<&'a Vec<f64>> {
    outcome
        .candidates
        .iter()
        .min_by(|a, b| {
            let da = metrics::imad(x, a, mad_weights).unwrap_or(f64::INFINITY);
            let db = metrics::imad(x, b, mad_weights).unwrap_or(f64::INFINITY);
            da.partial_cmp(&db).unwrap()
        })
        .filter(|_| outcome.found)
}

/// Aggregates one cell's outcomes into a report row. Proximity and sparsity
/// means cover found outcomes only; stability averages consecutive run
/// pairs per instance; timing averages all attempts.
pub fn aggregate_cell(
    prepared: &PreparedDataset,
    model: ModelKind,
    algorithm: Algorithm,
    n_instances: usize,
    n_runs: usize,
    outcomes: &[RunOutcome],
) -> Result<ReportRow> {
    let data = &prepared.data;
    let mad_weights = data.mad_weights();
    let immutable_mask = data.immutable_mask();
    let layout = data.layout();

    let mut records: Vec<MetricRecord> = Vec::new();
    let mut n_found = 0;
    let mut seconds_sum = 0.0;
    let mut any_diverse = false;
    for run in outcomes {
        seconds_sum += run.outcome.seconds;
        if !run.outcome.found {
            continue;
        }
        n_found += 1;
        any_diverse |= metrics::diversity_check(&run.outcome);
        let x = data.row(run.instance_row).to_vec();
        let candidate = representative_candidate(&run.outcome, &x, &mad_weights)
            .ok_or_else(|| Error::InvalidConfig("found outcome without candidates".into()))?;
        records.push(MetricRecord::compute(
            &x,
            candidate,
            layout,
            &mad_weights,
            data.cov(),
            &immutable_mask,
            metrics::diversity_check(&run.outcome),
        )?);
    }

    let mean = |f: &dyn Fn(&MetricRecord) -> f64| -> Option<f64> {
        (!records.is_empty())
            .then(|| records.iter().map(|r| f(r)).sum::<f64>() / records.len() as f64)
    };

    // stability over consecutive run pairs within each instance
    let mut pairs = 0usize;
    let mut stable_sum = 0usize;
    for ordinal in 0..n_instances {
        let runs: Vec<&RunOutcome> = outcomes
            .iter()
            .filter(|o| o.instance_ordinal == ordinal)
            .collect();
        for w in runs.windows(2) {
            pairs += 1;
            stable_sum += metrics::stability(&w[0].outcome, &w[1].outcome) as usize;
        }
    }
    let stability = if pairs == 0 { 1.0 } else { stable_sum as f64 / pairs as f64 };

    let total = outcomes.len().max(1);
    Ok(ReportRow {
        dataset: prepared.name.clone(),
        model,
        algorithm,
        n_instances,
        n_runs,
        n_found,
        mean_l1: mean(&|r| r.l1),
        mean_l2: mean(&|r| r.l2),
        mean_imad: mean(&|r| r.imad),
        mean_md: mean(&|r| r.md),
        mean_spa: mean(&|r| r.spa as f64),
        mean_spa_rate: mean(&|r| r.spa_rate),
        plausible: records.iter().all(|r| r.plausible),
        feasible: records.iter().all(|r| r.plausible),
        diverse: any_diverse,
        compatible: algorithm.handles_categorical(),
        stability,
        coverage: n_found as f64 / total as f64,
        mean_seconds: seconds_sum / total as f64,
    })
}

struct TrainedModel {
    dataset_index: usize,
    kind: ModelKind,
    predictor: Predictor,
    accuracy: f64,
}

/// Executes the full grid. Per-cell failures are recorded in the report and
/// do not abort the run; configuration and data errors do.
pub fn run_benchmark(config: &BenchConfig, parallel: bool, force: bool) -> Result<BenchmarkReport> {
    config.validate()?;
    let datasets = prepare(config)?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(&config.output_dir, e))?;

    // train each (dataset, kind) once, shared across algorithm cells
    let train_one = |(di, kind): (usize, ModelKind)| -> Result<TrainedModel> {
        let prepared = &datasets[di];
        let seed = seed_for(config.seed, &["train", &prepared.name, &kind.to_string()]);
        let predictor = train_model(config, &prepared.data, kind, seed)?;
        let accuracy = models::test_accuracy(&predictor, &prepared.data)?;
        Ok(TrainedModel { dataset_index: di, kind, predictor, accuracy })
    };
    let train_jobs: Vec<(usize, ModelKind)> = (0..datasets.len())
        .flat_map(|di| config.models.kinds.iter().map(move |&k| (di, k)))
        .collect();
    let trained: Vec<TrainedModel> = if parallel {
        train_jobs
            .into_par_iter()
            .map(train_one)
            .collect::<Result<Vec<_>>>()?
    } else {
        train_jobs
            .into_iter()
            .map(train_one)
            .collect::<Result<Vec<_>>>()?
    };

    let cells: Vec<(usize, usize, Algorithm)> = trained
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            config
                .algorithms
                .ids
                .iter()
                .map(move |&a| (t.dataset_index, ti, a))
        })
        .collect();

    let run_one = |&(di, ti, algorithm): &(usize, usize, Algorithm)| -> (usize, usize, Algorithm, Result<Vec<RunOutcome>>) {
        let prepared = &datasets[di];
        let model = trained[ti].kind;
        let meta = CellMeta {
            seed: config.seed,
            n_instances: config.n_instances,
            n_runs: config.n_runs,
            budget: config.budget,
            instance_rows: prepared.instances.clone(),
        };
        let path = cell_path(&config.output_dir, &prepared.name, model, algorithm);
        if !force {
            if let Some(outcomes) = load_cell(&path, &meta) {
                return (di, ti, algorithm, Ok(outcomes));
            }
        }
        let result = run_cell(config, prepared, model, &trained[ti].predictor, algorithm)
            .and_then(|outcomes| {
                store_cell(&path, &meta, &outcomes)?;
                Ok(outcomes)
            });
        (di, ti, algorithm, result)
    };

    let results: Vec<(usize, usize, Algorithm, Result<Vec<RunOutcome>>)> = if parallel {
        cells.par_iter().map(run_one).collect()
    } else {
        cells.iter().map(run_one).collect()
    };

    let mut report = BenchmarkReport::default();
    for t in &trained {
        report.model_accuracy.insert(
            format!("{}/{}", datasets[t.dataset_index].name, t.kind),
            t.accuracy,
        );
    }
    for (di, ti, algorithm, result) in results {
        let prepared = &datasets[di];
        let model = trained[ti].kind;
        match result {
            Ok(outcomes) => {
                let row = aggregate_cell(
                    prepared,
                    model,
                    algorithm,
                    config.n_instances.min(prepared.instances.len()),
                    config.n_runs,
                    &outcomes,
                )?;
                report.rows.push(row);
            }
            Err(e) => report.failures.push(CellFailure {
                dataset: prepared.name.clone(),
                model,
                algorithm,
                error: e.to_string(),
            }),
        }
    }
    report.normalize();
    Ok(report)
}

/// Loads one cell's stored outcomes (used by the path-analysis command).
pub fn load_or_run_cell(
    config: &BenchConfig,
    prepared: &PreparedDataset,
    model: ModelKind,
    predictor: &Predictor,
    algorithm: Algorithm,
) -> Result<Vec<RunOutcome>> {
    let meta = CellMeta {
        seed: config.seed,
        n_instances: config.n_instances,
        n_runs: config.n_runs,
        budget: config.budget,
        instance_rows: prepared.instances.clone(),
    };
    let path = cell_path(&config.output_dir, &prepared.name, model, algorithm);
    if let Some(outcomes) = load_cell(&path, &meta) {
        return Ok(outcomes);
    }
    let outcomes = run_cell(config, prepared, model, predictor, algorithm)?;
    store_cell(&path, &meta, &outcomes)?;
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, FeatureSpec};
    use std::io::Write;

    fn toy_config(dir: &Path) -> BenchConfig {
        // 40-row linearly separable numeric dataset
        let schema = FeatureSchema::new(
            "y",
            vec![FeatureSpec::numerical("a"), FeatureSpec::numerical("b")],
        )
        .unwrap();
        let schema_path = dir.join("toy.schema.json");
        schema.to_json_file(&schema_path).unwrap();
        let csv_path = dir.join("toy.csv");
        let mut f = std::fs::File::create(&csv_path).unwrap();
        writeln!(f, "a,b,y").unwrap();
        for i in 0..40 {
            let v = i as f64 / 39.0;
            let y = (v > 0.5) as u8;
            writeln!(f, "{v},{:.3},{y}", 1.0 - v).unwrap();
        }
        let toml_text = format!(
            r#"
seed = 7
n_instances = 2
n_runs = 2
output_dir = "{}"

[[datasets]]
name = "toy"
csv = "{}"
schema = "{}"

[models]
kinds = ["tree"]

[models.tree]
max_depth = 3
min_leaf = 1

[algorithms]
ids = ["growing_spheres"]
"#,
            dir.join("out").display(),
            csv_path.display(),
            schema_path.display(),
        );
        let config_path = dir.join("bench.toml");
        std::fs::write(&config_path, toml_text).unwrap();
        BenchConfig::from_toml_file(&config_path).unwrap()
    }

    #[test]
    fn minimal_grid_yields_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let report = run_benchmark(&config, false, false).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.failures.is_empty());
        let row = &report.rows[0];
        assert_eq!(row.n_found, (row.coverage * 4.0).round() as usize);
        assert!(row.coverage > 0.0);
    }

    #[test]
    fn same_seed_gives_byte_identical_canonical_reports() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let a = run_benchmark(&config, false, true).unwrap();
        let b = run_benchmark(&config, false, true).unwrap();
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
    }

    #[test]
    fn parallel_execution_matches_serial() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let serial = run_benchmark(&config, false, true).unwrap();
        let parallel = run_benchmark(&config, true, true).unwrap();
        assert_eq!(
            serial.canonical_json().unwrap(),
            parallel.canonical_json().unwrap()
        );
    }

    #[test]
    fn finished_cells_are_resumed_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let first = run_benchmark(&config, false, false).unwrap();
        // resumption must reproduce the same records without recomputing
        let cell = cell_path(&config.output_dir, "toy", ModelKind::Tree, Algorithm::GrowingSpheres);
        assert!(cell.exists());
        let before = std::fs::metadata(&cell).unwrap().modified().unwrap();
        let second = run_benchmark(&config, false, false).unwrap();
        let after = std::fs::metadata(&cell).unwrap().modified().unwrap();
        assert_eq!(before, after, "cell file was rewritten");
        assert_eq!(
            first.canonical_json().unwrap(),
            second.canonical_json().unwrap()
        );
    }

    #[test]
    fn instance_sampling_is_within_test_partition_and_deterministic() {
        let test_idx: Vec<usize> = (100..200).collect();
        let a = sample_instances(&test_idx, 10, 99);
        let b = sample_instances(&test_idx, 10, 99);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        for i in &a {
            assert!(test_idx.contains(i));
        }
        let all = sample_instances(&test_idx, 1000, 99);
        assert_eq!(all.len(), 100);
    }
}
