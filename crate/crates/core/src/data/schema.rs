//! Dataset schemas: per-feature kind, categorical levels, immutability flags
//! and scaling bounds.
//!
//! A schema is loaded from a JSON file shipped next to each dataset:
//!
//! ```json
//! {
//!   "label": "Outcome",
//!   "features": [
//!     { "name": "Age", "kind": "numerical", "immutable": true },
//!     { "name": "Job", "kind": "categorical", "levels": ["a", "b"], "immutable": false }
//!   ]
//! }
//! ```
//!
//! Numerical bounds (`min`/`max`) are optional; when absent they are fitted
//! on the training partition during scaling.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numerical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<f64>,
    },
    Categorical { levels: Vec<String> },
}

impl FeatureKind {
    pub fn is_numerical(&self) -> bool {
        matches!(self, FeatureKind::Numerical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default)]
    pub immutable: bool,
}

impl FeatureSpec {
    pub fn numerical(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Numerical { min: None, max: None },
            immutable: false,
        }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
            immutable: false,
        }
    }

    pub fn immutable(mut self) -> Self {
        self.immutable = true;
        self
    }

    /// Number of encoded columns this feature occupies.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            FeatureKind::Numerical { .. } => 1,
            FeatureKind::Categorical { levels } => levels.len(),
        }
    }
}

/// Ordered feature list plus the name of the label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub label: String,
    features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(label: &str, features: Vec<FeatureSpec>) -> Result<Self> {
        let mut names = HashSet::new();
        for spec in &features {
            if !names.insert(spec.name.clone()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature name '{}'",
                    spec.name
                )));
            }
            if let FeatureKind::Categorical { levels } = &spec.kind {
                if levels.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature '{}' has no levels",
                        spec.name
                    )));
                }
                let mut seen = HashSet::new();
                for level in levels {
                    if !seen.insert(level) {
                        return Err(Error::InvalidSchema(format!(
                            "feature '{}' has duplicate level '{}'",
                            spec.name, level
                        )));
                    }
                }
            }
        }
        if features.is_empty() {
            return Err(Error::InvalidSchema("schema has no features".into()));
        }
        Ok(FeatureSchema { label: label.to_string(), features })
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: FeatureSchema = serde_json::from_str(&text)?;
        // Re-validate through the constructor.
        FeatureSchema::new(&raw.label, raw.features)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    /// Number of raw features (before one-hot encoding).
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Total encoded column count.
    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(FeatureSpec::encoded_width).sum()
    }

    pub fn is_numeric_only(&self) -> bool {
        self.features.iter().all(|f| f.kind.is_numerical())
    }

    pub fn layout(&self) -> EncodedLayout {
        let mut groups = Vec::with_capacity(self.features.len());
        let mut col = 0;
        for (feature_index, spec) in self.features.iter().enumerate() {
            let width = spec.encoded_width();
            groups.push(ColumnGroup {
                feature_index,
                name: spec.name.clone(),
                start: col,
                width,
                one_hot: !spec.kind.is_numerical(),
                immutable: spec.immutable,
            });
            col += width;
        }
        EncodedLayout { groups, width: col }
    }
}

/// Mapping between raw features and encoded column ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedLayout {
    groups: Vec<ColumnGroup>,
    width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub feature_index: usize,
    pub name: String,
    pub start: usize,
    pub width: usize,
    pub one_hot: bool,
    pub immutable: bool,
}

impl ColumnGroup {
    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

impl EncodedLayout {
    pub fn groups(&self) -> &[ColumnGroup] {
        &self.groups
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_raw_features(&self) -> usize {
        self.groups.len()
    }

    pub fn has_one_hot(&self) -> bool {
        self.groups.iter().any(|g| g.one_hot)
    }

    /// The raw feature an encoded column belongs to.
    pub fn group_of(&self, column: usize) -> &ColumnGroup {
        debug_assert!(column < self.width);
        self.groups
            .iter()
            .find(|g| g.columns().contains(&column))
            .expect("column within layout width")
    }

    /// Immutable flags expanded over encoded columns.
    pub fn immutable_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.width];
        for group in &self.groups {
            if group.immutable {
                for c in group.columns() {
                    mask[c] = true;
                }
            }
        }
        mask
    }
}
