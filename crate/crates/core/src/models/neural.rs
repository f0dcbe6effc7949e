//! Single-hidden-layer feed-forward network: ReLU hidden units, sigmoid
//! output, trained with seeded mini-batch gradient descent on log-loss.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    #[serde(with = "crate::data::dataset::serde_array2")]
    w1: Array2<f64>, // hidden x input
    b1: Vec<f64>,
    w2: Vec<f64>, // hidden
    b2: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NeuralParams {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

impl Default for NeuralParams {
    fn default() -> Self {
        NeuralParams { hidden: 32, epochs: 400, lr: 0.01, batch: 32 }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl NeuralNet {
    pub fn init(n_features: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = (6.0 / (n_features + hidden) as f64).sqrt();
        let w1 = Array2::from_shape_fn((hidden, n_features), |_| rng.random_range(-s1..s1));
        let s2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w2: Vec<f64> = (0..hidden).map(|_| rng.random_range(-s2..s2)).collect();
        NeuralNet { w1, b1: vec![0.0; hidden], w2, b2: 0.0 }
    }

    pub fn fit(
        x: &Array2<f64>,
        y: &[u8],
        rows: &[usize],
        params: NeuralParams,
        seed: u64,
    ) -> Result<Self> {
        assert!(params.hidden >= 1, "hidden layer needs at least one unit");
        assert!(!rows.is_empty(), "training partition is empty");
        let mut net = NeuralNet::init(x.ncols(), params.hidden, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut order = rows.to_vec();
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(params.batch.max(1)) {
                epoch_loss += net.sgd_step(x, y, batch, params.lr);
            }
            if !epoch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
        }
        Ok(net)
    }

    /// One gradient step on the mean log-loss of a batch; returns the batch's
    /// summed loss before the step.
    fn sgd_step(&mut self, x: &Array2<f64>, y: &[u8], batch: &[usize], lr: f64) -> f64 {
        let hidden = self.w2.len();
        let n_in = self.w1.ncols();
        let mut gw1 = Array2::<f64>::zeros((hidden, n_in));
        let mut gb1 = vec![0.0; hidden];
        let mut gw2 = vec![0.0; hidden];
        let mut gb2 = 0.0;
        let mut loss = 0.0;
        for &i in batch {
            let xi: Vec<f64> = x.row(i).to_vec();
            let (a, h, p) = self.forward(&xi);
            let target = y[i] as f64;
            let pc = p.clamp(1e-12, 1.0 - 1e-12);
            loss += -(target * pc.ln() + (1.0 - target) * (1.0 - pc).ln());
            let dz = p - target;
            gb2 += dz;
            for k in 0..hidden {
                gw2[k] += dz * h[k];
                if a[k] > 0.0 {
                    let da = dz * self.w2[k];
                    gb1[k] += da;
                    for (j, xij) in xi.iter().enumerate() {
                        gw1[[k, j]] += da * xij;
                    }
                }
            }
        }
        let scale = lr / batch.len() as f64;
        self.b2 -= scale * gb2;
        for k in 0..hidden {
            self.w2[k] -= scale * gw2[k];
            self.b1[k] -= scale * gb1[k];
            for j in 0..n_in {
                self.w1[[k, j]] -= scale * gw1[[k, j]];
            }
        }
        loss
    }

    /// Pre-activations, hidden activations, and p(class = 1).
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let hidden = self.w2.len();
        let mut a = vec![0.0; hidden];
        let mut h = vec![0.0; hidden];
        let mut z = self.b2;
        for k in 0..hidden {
            let mut s = self.b1[k];
            for (j, xj) in x.iter().enumerate() {
                s += self.w1[[k, j]] * xj;
            }
            a[k] = s;
            h[k] = s.max(0.0);
            z += self.w2[k] * h[k];
        }
        (a, h, sigmoid(z))
    }

    pub fn n_features(&self) -> usize {
        self.w1.ncols()
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        let (_, _, p1) = self.forward(x);
        [1.0 - p1, p1]
    }

    /// Analytic gradient of p(class = 1) with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        let hidden = self.w2.len();
        let (a, _, p) = self.forward(x);
        let dp_dz = p * (1.0 - p);
        let mut grad = vec![0.0; x.len()];
        for k in 0..hidden {
            if a[k] > 0.0 {
                let c = dp_dz * self.w2[k];
                for (j, g) in grad.iter_mut().enumerate() {
                    *g += c * self.w1[[k, j]];
                }
            }
        }
        grad
    }

    /// Log-loss of one sample; used by the finite-difference gradient check.
    pub fn sample_loss(&self, x: &[f64], y: u8) -> f64 {
        let (_, _, p) = self.forward(x);
        let pc = p.clamp(1e-12, 1.0 - 1e-12);
        -((y as f64) * pc.ln() + (1.0 - y as f64) * (1.0 - pc).ln())
    }

    /// Analytic weight-space gradient of one sample's log-loss, flattened as
    /// (w1 row-major, b1, w2, b2). Test support for the finite-difference
    /// oracle.
    pub fn sample_weight_gradient(&self, x: &[f64], y: u8) -> Vec<f64> {
        let hidden = self.w2.len();
        let n_in = self.w1.ncols();
        let (a, h, p) = self.forward(x);
        let dz = p - y as f64;
        let mut grad = Vec::with_capacity(hidden * n_in + 2 * hidden + 1);
        for k in 0..hidden {
            for xj in x.iter().take(n_in) {
                if a[k] > 0.0 {
                    grad.push(dz * self.w2[k] * xj);
                } else {
                    grad.push(0.0);
                }
            }
        }
        for k in 0..hidden {
            grad.push(if a[k] > 0.0 { dz * self.w2[k] } else { 0.0 });
        }
        for k in 0..hidden {
            grad.push(dz * h[k]);
        }
        grad.push(dz);
        grad
    }

    /// Mutable flattened view used by the finite-difference oracle.
    pub fn weight_mut(&mut self, index: usize) -> &mut f64 {
        let hidden = self.w2.len();
        let n_in = self.w1.ncols();
        let n_w1 = hidden * n_in;
        if index < n_w1 {
            let k = index / n_in;
            let j = index % n_in;
            &mut self.w1[[k, j]]
        } else if index < n_w1 + hidden {
            &mut self.b1[index - n_w1]
        } else if index < n_w1 + 2 * hidden {
            &mut self.w2[index - n_w1 - hidden]
        } else {
            &mut self.b2
        }
    }

    pub fn n_weights(&self) -> usize {
        self.w2.len() * self.w1.ncols() + 2 * self.w2.len() + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> (Array2<f64>, Vec<u8>, Vec<usize>) {
        let x = array![
            [0.1, 0.9],
            [0.2, 0.8],
            [0.15, 0.7],
            [0.8, 0.2],
            [0.9, 0.1],
            [0.85, 0.3]
        ];
        (x, vec![0, 0, 0, 1, 1, 1], (0..6).collect())
    }

    #[test]
    fn weight_gradient_matches_central_differences() {
        let (x, y, _) = toy();
        let net = NeuralNet::init(2, 8, 3);
        let xi = x.row(0).to_vec();
        let analytic = net.sample_weight_gradient(&xi, y[0]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-6;
        for _ in 0..10 {
            let idx = rng.random_range(0..net.n_weights());
            let mut plus = net.clone();
            *plus.weight_mut(idx) += h;
            let mut minus = net.clone();
            *minus.weight_mut(idx) -= h;
            let fd = (plus.sample_loss(&xi, y[0]) - minus.sample_loss(&xi, y[0])) / (2.0 * h);
            let denom = fd.abs().max(analytic[idx].abs()).max(1e-8);
            assert!(
                (fd - analytic[idx]).abs() / denom < 1e-4,
                "weight {idx}: fd {fd} vs analytic {}",
                analytic[idx]
            );
        }
    }

    #[test]
    fn input_gradient_matches_central_differences() {
        let net = NeuralNet::init(4, 16, 5);
        let x = vec![0.3, 0.6, 0.1, 0.9];
        let analytic = net.input_gradient(&x);
        let h = 1e-6;
        for j in 0..4 {
            let mut plus = x.clone();
            plus[j] += h;
            let mut minus = x.clone();
            minus[j] -= h;
            let fd = (net.predict_proba(&plus)[1] - net.predict_proba(&minus)[1]) / (2.0 * h);
            let denom = fd.abs().max(analytic[j].abs()).max(1e-8);
            assert!((fd - analytic[j]).abs() / denom < 1e-4);
        }
    }

    #[test]
    fn zero_epochs_reproducible_under_seed() {
        let (x, y, rows) = toy();
        let params = NeuralParams { hidden: 4, epochs: 0, lr: 0.01, batch: 2 };
        let a = NeuralNet::fit(&x, &y, &rows, params, 99).unwrap();
        let b = NeuralNet::fit(&x, &y, &rows, params, 99).unwrap();
        assert_eq!(a, b);
        // zero epochs: parameters are exactly the seeded initialization
        assert_eq!(a, NeuralNet::init(2, 4, 99));
    }

    #[test]
    fn training_is_deterministic_and_learns_toy_set() {
        let (x, y, rows) = toy();
        let params = NeuralParams { hidden: 8, epochs: 300, lr: 0.5, batch: 3 };
        let a = NeuralNet::fit(&x, &y, &rows, params, 7).unwrap();
        let b = NeuralNet::fit(&x, &y, &rows, params, 7).unwrap();
        assert_eq!(a, b);
        for (i, &label) in y.iter().enumerate() {
            let p = a.predict_proba(&x.row(i).to_vec());
            let predicted = if p[0] >= p[1] { 0u8 } else { 1 };
            assert_eq!(predicted, label, "row {i}");
        }
    }

    #[test]
    fn overflowing_activations_report_non_finite_loss() {
        // values near f64::MAX overflow the hidden sums into inf/NaN
        let x = array![[1e308, 1e308], [-1e308, 1e308]];
        let y = [0u8, 1];
        let params = NeuralParams { hidden: 8, epochs: 5, lr: 1e6, batch: 2 };
        match NeuralNet::fit(&x, &y, &[0, 1], params, 7) {
            Err(Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }
}
