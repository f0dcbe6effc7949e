//! Configuration-driven benchmark: runs the (dataset x model x algorithm)
//! grid reproducibly, aggregates the metric suite per cell, compares model
//! impact, sweeps generator hyperparameters and drives the decision-path
//! bias analysis.

pub mod config;
pub mod impact;
pub mod report;
pub mod runner;
pub mod seeds;
pub mod sweep;

pub use config::BenchConfig;
pub use impact::{model_impact_summary, ImpactSummary};
pub use report::{emit_report, BenchmarkReport, ReportFormat, ReportRow};
pub use runner::{run_benchmark, RunOutcome};
pub use seeds::seed_for;
pub use sweep::{sweep_hyperparameter, SweepParam, SweepTable};

use crate::cf::Algorithm;
use crate::error::Result;
use crate::models::ModelKind;
use crate::paths::{bias_report, BiasReport};

/// Runs the path-analysis pass: for every dataset's decision-tree cell,
/// extracts (instance, counterfactual) decision paths per outcome and
/// builds the bias report. Reuses stored cell outcomes when present.
pub fn run_bias_analysis(config: &BenchConfig) -> Result<Vec<(String, BiasReport)>> {
    config.validate()?;
    let datasets = runner::prepare(config)?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| crate::error::Error::io(&config.output_dir, e))?;
    let mut reports = Vec::new();
    for prepared in &datasets {
        let seed = seed_for(config.seed, &["train", &prepared.name, "tree"]);
        let predictor = runner::train_model(config, &prepared.data, ModelKind::Tree, seed)?;
        let mad_weights = prepared.data.mad_weights();
        let mut results: Vec<(Algorithm, usize, usize, Vec<f64>, Vec<f64>)> = Vec::new();
        for &algorithm in &config.algorithms.ids {
            let outcomes = runner::load_or_run_cell(
                config,
                prepared,
                ModelKind::Tree,
                &predictor,
                algorithm,
            )?;
            for run in &outcomes {
                let x = prepared.data.row(run.instance_row).to_vec();
                if let Some(candidate) =
                    runner::representative_candidate(&run.outcome, &x, &mad_weights)
                {
                    results.push((
                        algorithm,
                        run.instance_ordinal,
                        run.run,
                        x,
                        candidate.clone(),
                    ));
                }
            }
        }
        let report = bias_report(&prepared.name, &prepared.data, &predictor, &results)?;
        reports.push((prepared.name.clone(), report));
    }
    Ok(reports)
}
