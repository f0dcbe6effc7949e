//! Quantitative evaluation of counterfactual candidates: proximity,
//! interpretability and functionality metrics.
//!
//! All proximity metrics operate in the scaled, encoded feature space the
//! generators optimize in. Sparsity counts raw features, so a full one-hot
//! group change counts once.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cf::CounterfactualOutcome;
use crate::data::EncodedLayout;
use crate::error::{Error, Result};

/// Tolerance below which a coordinate counts as unchanged.
pub const CHANGE_TOL: f64 = 1e-9;
/// Per-coordinate tolerance for comparing two runs' candidates.
pub const STABILITY_TOL: f64 = 1e-6;
/// Ridge added to the covariance matrix before inversion.
pub const COV_RIDGE: f64 = 1e-6;

fn check_len(x: &[f64], x2: &[f64]) -> Result<()> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: x2.len() });
    }
    Ok(())
}

pub fn l1_norm(x: &[f64], x2: &[f64]) -> Result<f64> {
    check_len(x, x2)?;
    Ok(x.iter().zip(x2).map(|(a, b)| (a - b).abs()).sum())
}

pub fn l2_norm(x: &[f64], x2: &[f64]) -> Result<f64> {
    check_len(x, x2)?;
    Ok(x.iter()
        .zip(x2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// MAD-normalized L1 distance. `mad_weights` must already have zero entries
/// substituted by 1 (see `EncodedDataset::mad_weights`).
pub fn imad(x: &[f64], x2: &[f64], mad_weights: &[f64]) -> Result<f64> {
    check_len(x, x2)?;
    check_len(x, mad_weights)?;
    Ok(x.iter()
        .zip(x2)
        .zip(mad_weights)
        .map(|((a, b), m)| (a - b).abs() / m)
        .sum())
}

/// sqrt(d' V^-1 d). A ridge of `COV_RIDGE * I` is added only when V itself
/// is not positive definite (one-hot columns make it singular).
pub fn mahalanobis(x: &[f64], x2: &[f64], cov: &Array2<f64>) -> Result<f64> {
    check_len(x, x2)?;
    if cov.nrows() != x.len() || cov.ncols() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: cov.nrows() });
    }
    let delta: Vec<f64> = x.iter().zip(x2).map(|(a, b)| a - b).collect();
    let chol = cholesky(cov).or_else(|| {
        let mut reg = cov.clone();
        for i in 0..reg.nrows() {
            reg[[i, i]] += COV_RIDGE;
        }
        cholesky(&reg)
    });
    let chol = chol.ok_or(Error::SingularMatrix)?;
    let v = cholesky_solve(&chol, &delta);
    let q: f64 = delta.iter().zip(&v).map(|(d, s)| d * s).sum();
    Ok(q.max(0.0).sqrt())
}

/// Number of raw features changed beyond `tol`; one-hot groups count once.
pub fn sparsity(x: &[f64], x2: &[f64], layout: &EncodedLayout, tol: f64) -> Result<usize> {
    check_len(x, x2)?;
    if x.len() != layout.width() {
        return Err(Error::DimensionMismatch { expected: layout.width(), got: x.len() });
    }
    let mut count = 0;
    for group in layout.groups() {
        let changed = group
            .columns()
            .any(|c| (x[c] - x2[c]).abs() > tol);
        if changed {
            count += 1;
        }
    }
    Ok(count)
}

pub fn sparsity_rate(x: &[f64], x2: &[f64], layout: &EncodedLayout, tol: f64) -> Result<f64> {
    let p = layout.n_raw_features();
    if p == 0 {
        return Err(Error::InvalidConfig("sparsity rate over zero features".into()));
    }
    Ok(sparsity(x, x2, layout, tol)? as f64 / p as f64)
}

/// True iff every masked coordinate is unchanged within `CHANGE_TOL`.
pub fn plausibility_check(x: &[f64], x2: &[f64], immutable_mask: &[bool]) -> Result<bool> {
    check_len(x, x2)?;
    if immutable_mask.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: immutable_mask.len(),
        });
    }
    Ok(x.iter()
        .zip(x2)
        .zip(immutable_mask)
        .all(|((a, b), &masked)| !masked || (a - b).abs() <= CHANGE_TOL))
}

pub fn coverage(outcomes: &[CounterfactualOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let found = outcomes.iter().filter(|o| o.found).count();
    found as f64 / outcomes.len() as f64
}

/// 1 iff two consecutive runs agree: both not-found, or candidate sets equal
/// within `STABILITY_TOL` per coordinate (compared after a lexicographic
/// sort, so candidate order does not matter).
pub fn stability(a: &CounterfactualOutcome, b: &CounterfactualOutcome) -> u8 {
    match (a.found, b.found) {
        (false, false) => 1,
        (true, true) => {
            if a.candidates.len() != b.candidates.len() {
                return 0;
            }
            let sorted = |cands: &[Vec<f64>]| {
                let mut v = cands.to_vec();
                v.sort_by(|p, q| {
                    p.iter()
                        .zip(q)
                        .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                v
            };
            let ca = sorted(&a.candidates);
            let cb = sorted(&b.candidates);
            let equal = ca.iter().zip(&cb).all(|(p, q)| {
                p.len() == q.len()
                    && p.iter().zip(q).all(|(x, y)| (x - y).abs() <= STABILITY_TOL)
            });
            equal as u8
        }
        _ => 0,
    }
}

/// Wall-clock seconds the generator spent on this outcome.
pub fn efficiency(outcome: &CounterfactualOutcome) -> f64 {
    outcome.seconds
}

/// True iff the outcome holds at least two pairwise-distinct candidates.
pub fn diversity_check(outcome: &CounterfactualOutcome) -> bool {
    let cands = &outcome.candidates;
    for i in 0..cands.len() {
        for j in (i + 1)..cands.len() {
            let distinct = cands[i]
                .iter()
                .zip(&cands[j])
                .any(|(a, b)| (a - b).abs() > CHANGE_TOL);
            if distinct {
                return true;
            }
        }
    }
    false
}

/// Per-(instance, run) metric values, one row of the raw benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub l1: f64,
    pub l2: f64,
    pub imad: f64,
    pub md: f64,
    pub spa: usize,
    pub spa_rate: f64,
    pub plausible: bool,
    pub diverse: bool,
}

impl MetricRecord {
    /// Metrics of one candidate against its original instance.
    pub fn compute(
        x: &[f64],
        candidate: &[f64],
        layout: &EncodedLayout,
        mad_weights: &[f64],
        cov: &Array2<f64>,
        immutable_mask: &[bool],
        diverse: bool,
    ) -> Result<Self> {
        Ok(MetricRecord {
            l1: l1_norm(x, candidate)?,
            l2: l2_norm(x, candidate)?,
            imad: imad(x, candidate, mad_weights)?,
            md: mahalanobis(x, candidate, cov)?,
            spa: sparsity(x, candidate, layout, CHANGE_TOL)?,
            spa_rate: sparsity_rate(x, candidate, layout, CHANGE_TOL)?,
            plausible: plausibility_check(x, candidate, immutable_mask)?,
            diverse,
        })
    }
}

/// Lower-triangular Cholesky factor; `None` when the matrix is not positive
/// definite.
fn cholesky(m: &Array2<f64>) -> Option<Array2<f64>> {
    let n = m.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves (L L') v = b given the lower factor L.
fn cholesky_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut v = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * v[k];
        }
        v[i] = s / l[[i, i]];
    }
    v
}
