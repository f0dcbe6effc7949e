//! Aggregated benchmark report and its renderings (text table, CSV,
//! structured JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cf::Algorithm;
use crate::error::{Error, Result};
use crate::models::ModelKind;

/// One (dataset, model, algorithm) cell. Proximity and sparsity means are
/// over found outcomes only and absent when nothing was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: ModelKind,
    pub algorithm: Algorithm,
    pub n_instances: usize,
    pub n_runs: usize,
    pub n_found: usize,
    pub mean_l1: Option<f64>,
    pub mean_l2: Option<f64>,
    pub mean_imad: Option<f64>,
    pub mean_md: Option<f64>,
    pub mean_spa: Option<f64>,
    pub mean_spa_rate: Option<f64>,
    pub plausible: bool,
    pub feasible: bool,
    pub diverse: bool,
    pub compatible: bool,
    pub stability: f64,
    pub coverage: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub model: ModelKind,
    pub algorithm: Algorithm,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<CellFailure>,
    /// Test accuracy per "dataset/model".
    pub model_accuracy: BTreeMap<String, f64>,
}

const TEXT_HEADER: [&str; 16] = [
    "Dataset", "Model", "Algorithm", "L1", "L2", "IMAD", "MD", "Spa", "SpaRate", "Pla", "Fea",
    "Div", "Com", "Sta", "Cov", "Eff",
];

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "-".to_string(),
    }
}

fn fmt_bool(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

impl BenchmarkReport {
    /// Sorts rows into their stable output order.
    pub fn normalize(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.dataset, a.model, a.algorithm).cmp(&(&b.dataset, b.model, b.algorithm))
        });
        self.failures.sort_by(|a, b| {
            (&a.dataset, a.model, a.algorithm).cmp(&(&b.dataset, b.model, b.algorithm))
        });
    }

    pub fn row(
        &self,
        dataset: &str,
        model: ModelKind,
        algorithm: Algorithm,
    ) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.model == model && r.algorithm == algorithm)
    }

    /// Text table in the proximity | interpretability | functionality
    /// column order.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:<8} {:<16} {:>8} {:>8} {:>8} {:>8} {:>7} {:>8} {:>4} {:>4} {:>4} {:>4} {:>5} {:>5} {:>9}\n",
            TEXT_HEADER[0], TEXT_HEADER[1], TEXT_HEADER[2], TEXT_HEADER[3], TEXT_HEADER[4],
            TEXT_HEADER[5], TEXT_HEADER[6], TEXT_HEADER[7], TEXT_HEADER[8], TEXT_HEADER[9],
            TEXT_HEADER[10], TEXT_HEADER[11], TEXT_HEADER[12], TEXT_HEADER[13], TEXT_HEADER[14],
            TEXT_HEADER[15],
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:<8} {:<16} {:>8} {:>8} {:>8} {:>8} {:>7} {:>8} {:>4} {:>4} {:>4} {:>4} {:>5.2} {:>5.2} {:>9.3}\n",
                r.dataset,
                r.model.to_string(),
                r.algorithm.to_string(),
                fmt_opt(r.mean_l1),
                fmt_opt(r.mean_l2),
                fmt_opt(r.mean_imad),
                fmt_opt(r.mean_md),
                fmt_opt(r.mean_spa),
                fmt_opt(r.mean_spa_rate),
                fmt_bool(r.plausible),
                fmt_bool(r.feasible),
                fmt_bool(r.diverse),
                fmt_bool(r.compatible),
                r.stability,
                r.coverage,
                r.mean_seconds,
            ));
        }
        if !self.model_accuracy.is_empty() {
            out.push('\n');
            for (key, acc) in &self.model_accuracy {
                out.push_str(&format!("accuracy {key}: {acc:.3}\n"));
            }
        }
        if !self.failures.is_empty() {
            out.push('\n');
            for f in &self.failures {
                out.push_str(&format!(
                    "FAILED {}/{}/{}: {}\n",
                    f.dataset, f.model, f.algorithm, f.error
                ));
            }
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "dataset,model,algorithm,l1,l2,imad,md,spa,spa_rate,pla,fea,div,com,sta,cov,eff,n_found,n_runs\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.dataset,
                r.model,
                r.algorithm,
                fmt_opt(r.mean_l1),
                fmt_opt(r.mean_l2),
                fmt_opt(r.mean_imad),
                fmt_opt(r.mean_md),
                fmt_opt(r.mean_spa),
                fmt_opt(r.mean_spa_rate),
                fmt_bool(r.plausible),
                fmt_bool(r.feasible),
                fmt_bool(r.diverse),
                fmt_bool(r.compatible),
                r.stability,
                r.coverage,
                r.mean_seconds,
                r.n_found,
                r.n_instances * r.n_runs,
            ));
        }
        out
    }

    /// Canonical JSON with wall-clock timing stripped: the byte-identity
    /// artifact for reproducibility checks. Everything else in the report is
    /// deterministic under a fixed seed; timing never is.
    pub fn canonical_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(rows) = value.get_mut("rows").and_then(|v| v.as_array_mut()) {
            for row in rows {
                if let Some(obj) = row.as_object_mut() {
                    obj.remove("mean_seconds");
                }
            }
        }
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Structured,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::InvalidConfig(format!("unknown report format '{other}'"))),
        }
    }
}

/// Writes the report in the requested format; returns the files written.
pub fn emit_report(
    report: &BenchmarkReport,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Text => {
            let path = out_dir.join("report.txt");
            std::fs::write(&path, report.render_text()).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = out_dir.join("report.csv");
            std::fs::write(&path, report.render_csv()).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        ReportFormat::Structured => {
            let path = out_dir.join("report.json");
            report.save(&path)?;
            written.push(path);
            let canonical = out_dir.join("report.canonical.json");
            std::fs::write(&canonical, report.canonical_json()?)
                .map_err(|e| Error::io(&canonical, e))?;
            written.push(canonical);
        }
    }
    Ok(written)
}
