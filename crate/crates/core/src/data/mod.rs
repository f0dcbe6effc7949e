//! Dataset schema, CSV ingestion, one-hot encoding, scaling, splitting and
//! training-set statistics.

pub mod dataset;
pub mod schema;
pub mod table;

pub use dataset::{covariance, mad_vector, median, EncodedDataset};
pub use schema::{ColumnGroup, EncodedLayout, FeatureKind, FeatureSchema, FeatureSpec};
pub use table::{load_csv, RawTable, RawValue};

use std::path::Path;

use crate::error::Result;

/// Loads a CSV + schema pair and runs the full preparation pipeline:
/// encode, split, scale (bounds fitted on the training partition), and
/// training-set statistics.
pub fn prepare_dataset(
    csv_path: &Path,
    schema_path: &Path,
    split_fraction: f64,
    split_seed: u64,
) -> Result<EncodedDataset> {
    let schema = FeatureSchema::from_json_file(schema_path)?;
    let table = load_csv(csv_path, &schema)?;
    Ok(EncodedDataset::encode(&table, &schema)?
        .split(split_fraction, split_seed)?
        .scale()
        .compute_statistics())
}
