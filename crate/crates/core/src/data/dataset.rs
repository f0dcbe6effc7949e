//! Encoded dataset: one-hot expansion, min-max scaling, train/test split and
//! the training-set statistics (per-column MAD, covariance) the generators
//! and metrics consume.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::schema::{EncodedLayout, FeatureKind, FeatureSchema};
use crate::data::table::{RawTable, RawValue};
use crate::error::{Error, Result};

/// Per-encoded-column scaling bounds; `None` for one-hot columns.
pub type ScaleBounds = Option<(f64, f64)>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodedDataset {
    schema: FeatureSchema,
    layout: EncodedLayout,
    #[serde(with = "crate::data::dataset::serde_array2")]
    x: Array2<f64>,
    y: Vec<u8>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    scaling: Vec<ScaleBounds>,
    scaled: bool,
    mad: Vec<f64>,
    #[serde(with = "crate::data::dataset::serde_array2")]
    cov: Array2<f64>,
    warnings: Vec<String>,
}

impl EncodedDataset {
    /// One-hot encodes a raw table. The result is unscaled, unsplit
    /// (everything in the training partition) and carries no statistics yet.
    pub fn encode(table: &RawTable, schema: &FeatureSchema) -> Result<Self> {
        let layout = schema.layout();
        let p = layout.width();
        let n = table.n_rows();
        let mut x = Array2::<f64>::zeros((n, p));
        for (i, row) in table.rows.iter().enumerate() {
            if row.len() != schema.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: schema.n_features(),
                    got: row.len(),
                });
            }
            for (group, value) in layout.groups().iter().zip(row) {
                match value {
                    RawValue::Num(v) => x[[i, group.start]] = *v,
                    RawValue::Cat(level) => {
                        debug_assert!(*level < group.width);
                        x[[i, group.start + level]] = 1.0;
                    }
                }
            }
        }
        Ok(EncodedDataset {
            schema: schema.clone(),
            layout,
            x,
            y: table.labels.clone(),
            train_idx: (0..n).collect(),
            test_idx: Vec::new(),
            scaling: vec![None; p],
            scaled: false,
            mad: Vec::new(),
            cov: Array2::zeros((0, 0)),
            warnings: Vec::new(),
        })
    }

    /// Deterministic shuffle split. The training partition gets
    /// `floor(fraction * n)` rows; the rest is the test partition.
    pub fn split(mut self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split fraction must be in (0,1), got {fraction}"
            )));
        }
        let n = self.x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let n_train = (fraction * n as f64).floor() as usize;
        self.train_idx = order[..n_train].to_vec();
        self.test_idx = order[n_train..].to_vec();
        self.train_idx.sort_unstable();
        self.test_idx.sort_unstable();
        Ok(self)
    }

    /// Min-max scales numerical columns to [0,1]. Bounds come from the schema
    /// when given, otherwise they are fitted on the training partition.
    /// Calling `scale` on an already scaled dataset is a no-op: the stored
    /// bounds make the transform idempotent.
    pub fn scale(mut self) -> Self {
        if self.scaled {
            return self;
        }
        for group in self.layout.groups().to_vec() {
            if group.one_hot {
                continue;
            }
            let col = group.start;
            let spec = &self.schema.features()[group.feature_index];
            let (mut lo, mut hi) = match spec.kind {
                FeatureKind::Numerical { min, max } => (min, max),
                _ => unreachable!(),
            };
            if lo.is_none() || hi.is_none() {
                let mut fit_lo = f64::INFINITY;
                let mut fit_hi = f64::NEG_INFINITY;
                let rows: &[usize] = if self.train_idx.is_empty() {
                    // unsplit dataset: fit on everything
                    &[]
                } else {
                    &self.train_idx
                };
                let iter: Box<dyn Iterator<Item = usize>> = if rows.is_empty() {
                    Box::new(0..self.x.nrows())
                } else {
                    Box::new(rows.iter().copied())
                };
                for i in iter {
                    let v = self.x[[i, col]];
                    fit_lo = fit_lo.min(v);
                    fit_hi = fit_hi.max(v);
                }
                lo = lo.or(Some(fit_lo));
                hi = hi.or(Some(fit_hi));
            }
            let (lo, hi) = (lo.unwrap(), hi.unwrap());
            if hi <= lo {
                self.warnings.push(format!(
                    "column '{}' has constant range [{lo}, {hi}]; scaled to constant 0",
                    group.name
                ));
                for i in 0..self.x.nrows() {
                    self.x[[i, col]] = 0.0;
                }
                self.scaling[col] = Some((lo, lo + 1.0));
                continue;
            }
            for i in 0..self.x.nrows() {
                self.x[[i, col]] = (self.x[[i, col]] - lo) / (hi - lo);
            }
            self.scaling[col] = Some((lo, hi));
        }
        self.scaled = true;
        self
    }

    /// Computes the training-set MAD vector and covariance matrix.
    pub fn compute_statistics(mut self) -> Self {
        self.mad = mad_vector(&self.x, &self.train_idx);
        self.cov = covariance(&self.x, &self.train_idx);
        self
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn layout(&self) -> &EncodedLayout {
        &self.layout
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    pub fn train_idx(&self) -> &[usize] {
        &self.train_idx
    }

    pub fn test_idx(&self) -> &[usize] {
        &self.test_idx
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    /// Raw per-column MAD over the training rows (no zero substitution).
    pub fn mad(&self) -> &[f64] {
        &self.mad
    }

    /// MAD denominators with zero entries replaced by 1, so MAD-normalized
    /// distances stay defined on constant and one-hot columns.
    pub fn mad_weights(&self) -> Vec<f64> {
        self.mad
            .iter()
            .map(|&m| if m > 0.0 { m } else { 1.0 })
            .collect()
    }

    pub fn cov(&self) -> &Array2<f64> {
        &self.cov
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn immutable_mask(&self) -> Vec<bool> {
        self.layout.immutable_mask()
    }

    /// Inverse of the stored min-max transform for a single encoded column.
    pub fn unscale_value(&self, column: usize, value: f64) -> f64 {
        match self.scaling[column] {
            Some((lo, hi)) => lo + value * (hi - lo),
            None => value,
        }
    }

    /// Maps an encoded (scaled) row back to raw feature values.
    /// One-hot groups decode to the level with the largest activation.
    pub fn decode(&self, encoded: &[f64]) -> Result<Vec<RawValue>> {
        if encoded.len() != self.layout.width() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.width(),
                got: encoded.len(),
            });
        }
        let mut out = Vec::with_capacity(self.layout.n_raw_features());
        for group in self.layout.groups() {
            if group.one_hot {
                let (best, _) = encoded[group.columns()]
                    .iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                        if v > bv { (i, v) } else { (bi, bv) }
                    });
                out.push(RawValue::Cat(best));
            } else {
                out.push(RawValue::Num(self.unscale_value(group.start, encoded[group.start])));
            }
        }
        Ok(out)
    }

    /// Raw-space display value for one feature of an encoded row: the
    /// unscaled number, or the level name for categoricals.
    pub fn raw_display(&self, encoded: &[f64], feature_index: usize) -> String {
        let group = &self.layout.groups()[feature_index];
        if group.one_hot {
            let level = encoded[group.columns()]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            match &self.schema.features()[feature_index].kind {
                FeatureKind::Categorical { levels } => levels[level].clone(),
                _ => unreachable!(),
            }
        } else {
            format!("{:.4}", self.unscale_value(group.start, encoded[group.start]))
        }
    }
}

/// Per-column median absolute deviation over the given rows.
pub fn mad_vector(x: &Array2<f64>, rows: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let values: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
        let med = median(&values);
        let deviations: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
        out.push(median(&deviations));
    }
    out
}

/// Sample covariance (denominator n-1) over the given rows.
pub fn covariance(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let p = x.ncols();
    let n = rows.len();
    let mut cov = Array2::<f64>::zeros((p, p));
    if n < 2 {
        return cov;
    }
    let mut mean = Array1::<f64>::zeros(p);
    for &i in rows {
        for j in 0..p {
            mean[j] += x[[i, j]];
        }
    }
    mean.mapv_inplace(|v| v / n as f64);
    for &i in rows {
        for a in 0..p {
            let da = x[[i, a]] - mean[a];
            for b in a..p {
                let db = x[[i, b]] - mean[b];
                cov[[a, b]] += da * db;
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..p {
        for b in a..p {
            let v = cov[[a, b]] / denom;
            cov[[a, b]] = v;
            cov[[b, a]] = v;
        }
    }
    cov
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// serde adapter for `Array2<f64>` as (rows, cols, flat data).
pub(crate) mod serde_array2 {
    use ndarray::Array2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let flat: Vec<f64> = m.iter().copied().collect();
        (m.nrows(), m.ncols(), flat).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let (rows, cols, flat): (usize, usize, Vec<f64>) = Deserialize::deserialize(d)?;
        Array2::from_shape_vec((rows, cols), flat).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::FeatureSpec;
    use ndarray::array;

    fn numeric_schema(names: &[&str]) -> FeatureSchema {
        FeatureSchema::new(
            "y",
            names.iter().map(|n| FeatureSpec::numerical(n)).collect(),
        )
        .unwrap()
    }

    fn table_from(rows: Vec<Vec<RawValue>>, labels: Vec<u8>) -> RawTable {
        RawTable { rows, labels }
    }

    #[test]
    fn encode_identity_for_pure_numeric_schema() {
        let schema = numeric_schema(&["a", "b"]);
        let table = table_from(
            vec![
                vec![RawValue::Num(1.0), RawValue::Num(2.0)],
                vec![RawValue::Num(3.0), RawValue::Num(4.0)],
            ],
            vec![0, 1],
        );
        let ds = EncodedDataset::encode(&table, &schema).unwrap();
        assert_eq!(ds.x(), &array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn encode_one_hot_level_b_gives_0_1() {
        let schema =
            FeatureSchema::new("y", vec![FeatureSpec::categorical("c", &["a", "b"])]).unwrap();
        let table = table_from(vec![vec![RawValue::Cat(1)]], vec![0]);
        let ds = EncodedDataset::encode(&table, &schema).unwrap();
        assert_eq!(ds.x(), &array![[0.0, 1.0]]);
    }

    #[test]
    fn one_hot_rows_sum_to_one_per_group() {
        let schema = FeatureSchema::new(
            "y",
            vec![
                FeatureSpec::numerical("n"),
                FeatureSpec::categorical("c", &["a", "b", "c"]),
            ],
        )
        .unwrap();
        let table = table_from(
            vec![
                vec![RawValue::Num(0.5), RawValue::Cat(2)],
                vec![RawValue::Num(0.7), RawValue::Cat(0)],
            ],
            vec![0, 1],
        );
        let ds = EncodedDataset::encode(&table, &schema).unwrap();
        for i in 0..ds.n_rows() {
            let group_sum: f64 = (1..4).map(|c| ds.x()[[i, c]]).sum();
            assert_eq!(group_sum, 1.0);
        }
    }

    #[test]
    fn scale_maps_0_5_10_to_0_half_1() {
        let schema = numeric_schema(&["a"]);
        let table = table_from(
            vec![
                vec![RawValue::Num(0.0)],
                vec![RawValue::Num(5.0)],
                vec![RawValue::Num(10.0)],
            ],
            vec![0, 0, 1],
        );
        let ds = EncodedDataset::encode(&table, &schema).unwrap().scale();
        assert_eq!(ds.x().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn scale_is_idempotent() {
        let schema = numeric_schema(&["a"]);
        let table = table_from(
            vec![vec![RawValue::Num(2.0)], vec![RawValue::Num(4.0)]],
            vec![0, 1],
        );
        let once = EncodedDataset::encode(&table, &schema).unwrap().scale();
        let twice = once.clone().scale();
        assert_eq!(once.x(), twice.x());
    }

    #[test]
    fn constant_column_scales_to_zero_with_warning() {
        let schema = numeric_schema(&["a"]);
        let table = table_from(
            vec![
                vec![RawValue::Num(3.0)],
                vec![RawValue::Num(3.0)],
                vec![RawValue::Num(3.0)],
            ],
            vec![0, 0, 1],
        );
        let ds = EncodedDataset::encode(&table, &schema).unwrap().scale();
        assert_eq!(ds.x().column(0).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(ds.warnings().len(), 1);
    }

    #[test]
    fn split_768_at_08_gives_614_154() {
        let schema = numeric_schema(&["a"]);
        let rows: Vec<Vec<RawValue>> =
            (0..768).map(|i| vec![RawValue::Num(i as f64)]).collect();
        let labels = vec![0u8; 768];
        let ds = EncodedDataset::encode(&table_from(rows, labels), &schema)
            .unwrap()
            .split(0.8, 7)
            .unwrap();
        assert_eq!(ds.train_idx().len(), 614);
        assert_eq!(ds.test_idx().len(), 154);
    }

    #[test]
    fn split_569_at_08_gives_455_114() {
        // 455 + 114 partitions all 569 rows.
        let schema = numeric_schema(&["a"]);
        let rows: Vec<Vec<RawValue>> =
            (0..569).map(|i| vec![RawValue::Num(i as f64)]).collect();
        let ds = EncodedDataset::encode(&table_from(rows, vec![0; 569]), &schema)
            .unwrap()
            .split(0.8, 7)
            .unwrap();
        assert_eq!(ds.train_idx().len(), 455);
        assert_eq!(ds.test_idx().len(), 114);
        let mut all: Vec<usize> = ds.train_idx().iter().chain(ds.test_idx()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..569).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let schema = numeric_schema(&["a"]);
        let rows: Vec<Vec<RawValue>> =
            (0..10).map(|i| vec![RawValue::Num(i as f64)]).collect();
        let make = || {
            EncodedDataset::encode(&table_from(rows.clone(), vec![0; 10]), &schema)
                .unwrap()
                .split(0.8, 42)
                .unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a.train_idx(), b.train_idx());
        assert_eq!(a.test_idx(), b.test_idx());
        for i in a.train_idx() {
            assert!(!a.test_idx().contains(i));
        }
    }

    #[test]
    fn mad_of_1_to_5_is_1() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0]];
        let rows: Vec<usize> = (0..5).collect();
        assert_eq!(mad_vector(&x, &rows), vec![1.0]);
    }

    #[test]
    fn mad_of_constant_column_is_0() {
        let x = array![[2.0], [2.0], [2.0]];
        assert_eq!(mad_vector(&x, &[0, 1, 2]), vec![0.0]);
    }

    #[test]
    fn mad_of_sparse_binary_column_is_0() {
        // 10% ones: median 0, deviations mostly 0.
        let mut data = vec![0.0; 10];
        data[0] = 1.0;
        let x = Array2::from_shape_vec((10, 1), data).unwrap();
        let rows: Vec<usize> = (0..10).collect();
        assert_eq!(mad_vector(&x, &rows), vec![0.0]);
    }

    #[test]
    fn mad_matches_sort_based_oracle_on_random_columns() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(2..40);
            let col: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = Array2::from_shape_vec((n, 1), col.clone()).unwrap();
            let rows: Vec<usize> = (0..n).collect();
            let got = mad_vector(&x, &rows)[0];

            // independent oracle: plain sorts, no shared code path
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            let mut devs: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
            devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expected = if n % 2 == 1 {
                devs[n / 2]
            } else {
                (devs[n / 2 - 1] + devs[n / 2]) / 2.0
            };
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_of_perfectly_correlated_columns() {
        // second column = 3 * first: off-diagonal = sqrt(var1 * var2)
        let base = [1.0, 2.0, 4.0, 7.0, 11.0];
        let mut flat = Vec::new();
        for v in base {
            flat.push(v);
            flat.push(3.0 * v);
        }
        let x = Array2::from_shape_vec((5, 2), flat).unwrap();
        let rows: Vec<usize> = (0..5).collect();
        let cov = covariance(&x, &rows);
        let geo = (cov[[0, 0]] * cov[[1, 1]]).sqrt();
        assert!((cov[[0, 1]] - geo).abs() < 1e-9);
        assert!((cov[[0, 1]] - cov[[1, 0]]).abs() < 1e-15);
    }

    #[test]
    fn covariance_of_independent_standardized_columns_is_near_identity() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4000;
        let mut flat = Vec::with_capacity(n * 2);
        let mut cols = vec![Vec::with_capacity(n), Vec::with_capacity(n)];
        for _ in 0..n {
            for c in cols.iter_mut().take(2) {
                c.push(rng.random_range(-1.0f64..1.0));
            }
        }
        // standardize each column
        for c in cols.iter_mut() {
            let mean = c.iter().sum::<f64>() / n as f64;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            for v in c.iter_mut() {
                *v = (*v - mean) / sd;
            }
        }
        for i in 0..n {
            flat.push(cols[0][i]);
            flat.push(cols[1][i]);
        }
        let x = Array2::from_shape_vec((n, 2), flat).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let cov = covariance(&x, &rows);
        assert!((cov[[0, 0]] - 1.0).abs() < 0.05);
        assert!((cov[[1, 1]] - 1.0).abs() < 0.05);
        assert!(cov[[0, 1]].abs() < 0.08);
    }

    #[test]
    fn covariance_of_duplicated_row_is_zero() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let cov = covariance(&x, &[0, 1, 2]);
        assert_eq!(cov, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn covariance_is_psd_on_random_data() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, p) = (50, 6);
        let flat: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = Array2::from_shape_vec((n, p), flat).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let cov = covariance(&x, &rows);
        for _ in 0..200 {
            let z: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut q = 0.0;
            for a in 0..p {
                for b in 0..p {
                    q += z[a] * cov[[a, b]] * z[b];
                }
            }
            assert!(q >= -1e-9, "quadratic form {q} negative");
        }
    }

    #[test]
    fn decode_inverts_encode_and_scale() {
        let schema = FeatureSchema::new(
            "y",
            vec![
                FeatureSpec::numerical("n"),
                FeatureSpec::categorical("c", &["a", "b", "c"]),
            ],
        )
        .unwrap();
        let rows = vec![
            vec![RawValue::Num(10.0), RawValue::Cat(2)],
            vec![RawValue::Num(30.0), RawValue::Cat(0)],
            vec![RawValue::Num(20.0), RawValue::Cat(1)],
        ];
        let ds = EncodedDataset::encode(&table_from(rows.clone(), vec![0, 1, 0]), &schema)
            .unwrap()
            .scale();
        for (i, row) in rows.iter().enumerate() {
            let encoded: Vec<f64> = ds.row(i).to_vec();
            let decoded = ds.decode(&encoded).unwrap();
            for (orig, dec) in row.iter().zip(&decoded) {
                match (orig, dec) {
                    (RawValue::Num(a), RawValue::Num(b)) => assert!((a - b).abs() < 1e-9),
                    (RawValue::Cat(a), RawValue::Cat(b)) => assert_eq!(a, b),
                    _ => panic!("kind changed in round trip"),
                }
            }
        }
    }

    #[test]
    fn mad_weights_substitute_one_for_zero() {
        let schema = numeric_schema(&["a", "b"]);
        let table = table_from(
            vec![
                vec![RawValue::Num(1.0), RawValue::Num(5.0)],
                vec![RawValue::Num(2.0), RawValue::Num(5.0)],
                vec![RawValue::Num(3.0), RawValue::Num(5.0)],
            ],
            vec![0, 0, 1],
        );
        let ds = EncodedDataset::encode(&table, &schema)
            .unwrap()
            .compute_statistics();
        assert_eq!(ds.mad(), &[1.0, 0.0]);
        assert_eq!(ds.mad_weights(), vec![1.0, 1.0]);
    }
}
