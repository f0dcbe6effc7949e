//! CSV ingestion into a typed raw table.

use std::path::Path;

use crate::data::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// A raw (pre-encoding) cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Num(f64),
    /// Index into the feature's level list.
    Cat(usize),
}

impl RawValue {
    pub fn as_num(&self) -> f64 {
        match self {
            RawValue::Num(v) => *v,
            RawValue::Cat(i) => *i as f64,
        }
    }
}

/// Rows of typed cells in schema feature order, plus binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Reads a comma-separated file with a header row; header names must cover
/// every schema feature plus the schema's label column. Column order in the
/// file is free.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Csv { path: path.display().to_string(), source: e })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv { path: path.display().to_string(), source: e })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn { column: name.to_string() })
    };

    let feature_cols: Vec<usize> = schema
        .features()
        .iter()
        .map(|f| col_index(&f.name))
        .collect::<Result<_>>()?;
    let label_col = col_index(&schema.label)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::Csv { path: path.display().to_string(), source: e })?;
        let row_number = i + 1; // 1-based data row, header excluded
        let mut row = Vec::with_capacity(schema.n_features());
        for (spec, &col) in schema.features().iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("").trim();
            match &spec.kind {
                FeatureKind::Numerical { .. } => {
                    let v: f64 = cell.parse().map_err(|_| Error::CellParse {
                        row: row_number,
                        column: spec.name.clone(),
                        value: cell.to_string(),
                    })?;
                    row.push(RawValue::Num(v));
                }
                FeatureKind::Categorical { levels } => {
                    let idx = levels.iter().position(|l| l == cell).ok_or_else(|| {
                        Error::UnknownLevel {
                            row: row_number,
                            column: spec.name.clone(),
                            level: cell.to_string(),
                        }
                    })?;
                    row.push(RawValue::Cat(idx));
                }
            }
        }
        let label_cell = record.get(label_col).unwrap_or("").trim();
        let label = match label_cell {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                // Accept float-ish encodings like "1.0".
                match other.parse::<f64>() {
                    Ok(v) if v == 0.0 => 0,
                    Ok(v) if v == 1.0 => 1,
                    _ => {
                        return Err(Error::BadLabel {
                            row: row_number,
                            column: schema.label.clone(),
                            value: label_cell.to_string(),
                        })
                    }
                }
            }
        };
        rows.push(row);
        labels.push(label);
    }

    Ok(RawTable { rows, labels })
}
