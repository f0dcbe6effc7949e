//! Side-by-side comparison of proximity metrics across model kinds, for
//! judging how much the underlying predictor influences the generated
//! counterfactuals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bench::report::BenchmarkReport;
use crate::cf::Algorithm;
use crate::models::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub metric: String,
    /// Cell means per model kind, sorted by kind.
    pub values: Vec<(ModelKind, f64)>,
    /// Max pairwise spread relative to the across-model mean.
    pub relative_spread: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummary {
    pub rows: Vec<ImpactRow>,
}

const METRICS: [&str; 4] = ["l1", "l2", "imad", "md"];

/// Builds the per-(dataset, algorithm) comparison for every proximity
/// metric where at least two model kinds reported a mean. An empty summary
/// means no cell group had two model kinds to compare.
pub fn model_impact_summary(report: &BenchmarkReport) -> ImpactSummary {
    let mut groups: BTreeMap<(String, Algorithm), Vec<&crate::bench::report::ReportRow>> =
        BTreeMap::new();
    for row in &report.rows {
        groups
            .entry((row.dataset.clone(), row.algorithm))
            .or_default()
            .push(row);
    }
    let mut rows = Vec::new();
    for ((dataset, algorithm), cells) in groups {
        for metric in METRICS {
            let mut values: Vec<(ModelKind, f64)> = cells
                .iter()
                .filter_map(|cell| {
                    let v = match metric {
                        "l1" => cell.mean_l1,
                        "l2" => cell.mean_l2,
                        "imad" => cell.mean_imad,
                        _ => cell.mean_md,
                    };
                    v.map(|v| (cell.model, v))
                })
                .collect();
            if values.len() < 2 {
                continue;
            }
            values.sort_by_key(|(kind, _)| *kind);
            let lo = values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let hi = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            let mean =
                values.iter().map(|(_, v)| *v).sum::<f64>() / values.len() as f64;
            let relative_spread = (hi - lo) / mean.abs().max(1e-12);
            rows.push(ImpactRow {
                dataset: dataset.clone(),
                algorithm,
                metric: metric.to_string(),
                values,
                relative_spread,
            });
        }
    }
    ImpactSummary { rows }
}

impl ImpactSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,algorithm,metric,model,value,relative_spread\n");
        for row in &self.rows {
            for (model, value) in &row.values {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.dataset, row.algorithm, row.metric, model, value, row.relative_spread
                ));
            }
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "{:<14} {:<16} {:<6} {:>30} {:>8}\n",
            "dataset", "algorithm", "metric", "per-model means", "spread"
        );
        for row in &self.rows {
            let values = row
                .values
                .iter()
                .map(|(m, v)| format!("{m}={v:.3}"))
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&format!(
                "{:<14} {:<16} {:<6} {:>30} {:>8.3}\n",
                row.dataset,
                row.algorithm.to_string(),
                row.metric,
                values,
                row.relative_spread
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::report::ReportRow;

    fn row(model: ModelKind, imad: f64) -> ReportRow {
        ReportRow {
            dataset: "d".into(),
            model,
            algorithm: Algorithm::Dice,
            n_instances: 1,
            n_runs: 1,
            n_found: 1,
            mean_l1: Some(1.0),
            mean_l2: Some(1.0),
            mean_imad: Some(imad),
            mean_md: Some(0.5),
            plausible: true,
            feasible: true,
            diverse: true,
            compatible: true,
            stability: 0.0,
            coverage: 1.0,
            mean_seconds: 0.0,
            mean_spa: Some(1.0),
            mean_spa_rate: Some(0.1),
        }
    }

    #[test]
    fn single_model_kind_gives_empty_summary() {
        let report = BenchmarkReport { rows: vec![row(ModelKind::Tree, 1.0)], ..Default::default() };
        assert!(model_impact_summary(&report).rows.is_empty());
    }

    #[test]
    fn three_model_kinds_give_three_values_per_metric() {
        let report = BenchmarkReport {
            rows: vec![
                row(ModelKind::Tree, 1.0),
                row(ModelKind::Forest, 1.2),
                row(ModelKind::Neural, 0.9),
            ],
            ..Default::default()
        };
        let summary = model_impact_summary(&report);
        assert_eq!(summary.rows.len(), 4); // l1, l2, imad, md
        let imad_row = summary.rows.iter().find(|r| r.metric == "imad").unwrap();
        assert_eq!(imad_row.values.len(), 3);
        let expected = (1.2 - 0.9) / ((1.0 + 1.2 + 0.9) / 3.0);
        assert!((imad_row.relative_spread - expected).abs() < 1e-12);
    }
}
