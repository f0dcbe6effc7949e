//! Prototype-guided counterfactual search. Minimizes
//!
//! `c * L_pred(x') + beta * ||d||_1 + ||d||_2 + theta * ||x' - proto||_2^2`
//!
//! where `d = x - x'` and `proto` is the mean of the K nearest target-class
//! training instances, pulling candidates toward the data distribution. The
//! smooth terms step by gradient (analytic or perturbation fallback), the L1
//! term by soft-thresholding, with FISTA-style momentum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cf::perturb::perturbation_step;
use crate::cf::{
    clip01, project_one_hot, Algorithm, CfRequest, CounterfactualOutcome, EvalSession, Generator,
};
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::models::Predictor;

#[derive(Debug, Clone)]
pub struct PrototypeCf {
    pub c: f64,
    pub beta: f64,
    pub theta: f64,
    pub k_neighbors: usize,
    /// Margin added to the prediction hinge.
    pub kappa: f64,
    pub max_iters: usize,
    pub step: f64,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<u8>,
}

/// Elementwise soft-thresholding operator: `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// The loss's distance term `beta * ||d||_1 + ||d||_2`; with `beta = 0` it
/// is exactly the L2 norm.
pub fn elastic_distance(delta: &[f64], beta: f64) -> f64 {
    let l1: f64 = delta.iter().map(|v| v.abs()).sum();
    let l2: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    beta * l1 + l2
}

impl PrototypeCf {
    pub fn new(dataset: &EncodedDataset) -> Self {
        let train_x: Vec<Vec<f64>> = dataset
            .train_idx()
            .iter()
            .map(|&i| dataset.row(i).to_vec())
            .collect();
        let train_y: Vec<u8> = dataset.train_idx().iter().map(|&i| dataset.y()[i]).collect();
        PrototypeCf {
            c: 1.0,
            beta: 0.1,
            theta: 0.1,
            k_neighbors: 5,
            kappa: 0.05,
            max_iters: 80,
            step: 0.1,
            train_x,
            train_y,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Mean of the K nearest target-class training instances to `x`.
    fn prototype(&self, x: &[f64], y_target: u8) -> Result<Vec<f64>> {
        let mut members: Vec<(f64, &Vec<f64>)> = self
            .train_x
            .iter()
            .zip(&self.train_y)
            .filter(|(_, &y)| y == y_target)
            .map(|(row, _)| {
                let d: f64 = row
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d, row)
            })
            .collect();
        if members.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "no training instances of target class {y_target}"
            )));
        }
        members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let take = self.k_neighbors.min(members.len());
        let mut proto = vec![0.0; x.len()];
        for (_, row) in members.iter().take(take) {
            for (p, v) in proto.iter_mut().zip(row.iter()) {
                *p += v;
            }
        }
        for p in proto.iter_mut() {
            *p /= take as f64;
        }
        Ok(proto)
    }

    /// Full objective; `None` once the budget is exhausted.
    fn loss(
        &self,
        session: &mut EvalSession,
        x: &[f64],
        z: &[f64],
        proto: &[f64],
        y_target: u8,
    ) -> Option<f64> {
        let p = session.proba(z)?;
        let p_target = p[y_target as usize];
        let p_other = p[1 - y_target as usize];
        let pred = (p_other - p_target + self.kappa).max(0.0);
        let delta: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        let proto_term: f64 = z
            .iter()
            .zip(proto)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Some(self.c * pred + elastic_distance(&delta, self.beta) + self.theta * proto_term)
    }
}

impl Generator for PrototypeCf {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Prototype
    }

    fn generate(&self, request: &CfRequest, predictor: &Predictor) -> Result<CounterfactualOutcome> {
        request.validate(predictor)?;
        let start = std::time::Instant::now();
        let mut session = EvalSession::new(predictor, request.budget);
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        let x = &request.x;
        let y_target = request.y_target;
        let proto = self.prototype(x, y_target)?;

        let transform = |mut proposal: Vec<f64>| {
            clip01(&mut proposal);
            project_one_hot(&mut proposal, &request.layout);
            proposal
        };

        let mut current = x.clone();
        let mut previous = current.clone();
        let mut momentum = 1.0f64;
        let mut best_valid: Option<(f64, Vec<f64>)> = None;
        let Some(mut current_loss) = self.loss(&mut session, x, &current, &proto, y_target)
        else {
            return Ok(CounterfactualOutcome::not_found(
                Algorithm::Prototype,
                session.evaluations(),
            ));
        };

        for _ in 0..self.max_iters {
            if session.exhausted() {
                break;
            }
            // momentum extrapolation point
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let w = (momentum - 1.0) / t_next;
            let y_point: Vec<f64> = current
                .iter()
                .zip(&previous)
                .map(|(c, p)| c + w * (c - p))
                .collect();

            let Some(grad_model) = session.gradient(&y_point, y_target) else {
                break;
            };
            let grad_norm: f64 = grad_model.iter().map(|g| g * g).sum::<f64>().sqrt();

            let mut accepted: Option<(Vec<f64>, f64)> = None;
            if grad_norm > 1e-12 {
                // smooth part gradient at the extrapolation point
                let p = match session.proba(&y_point) {
                    Some(p) => p,
                    None => break,
                };
                let hinge_active = p[1 - y_target as usize] - p[y_target as usize] + self.kappa > 0.0;
                let delta: Vec<f64> = y_point.iter().zip(x).map(|(z, a)| z - a).collect();
                let delta_norm: f64 =
                    delta.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let mut eta = self.step;
                for _ in 0..6 {
                    let mut proposal: Vec<f64> = Vec::with_capacity(x.len());
                    for j in 0..x.len() {
                        let mut g = 0.0;
                        if hinge_active {
                            g += self.c * (-2.0) * grad_model[j];
                        }
                        g += delta[j] / delta_norm;
                        g += 2.0 * self.theta * (y_point[j] - proto[j]);
                        let stepped = y_point[j] - eta * g;
                        // proximal step on the L1 term in delta space
                        let d = soft_threshold(stepped - x[j], eta * self.beta);
                        proposal.push(x[j] + d);
                    }
                    let cand = transform(proposal);
                    match self.loss(&mut session, x, &cand, &proto, y_target) {
                        Some(l) if l < current_loss - 1e-12 => {
                            accepted = Some((cand, l));
                            break;
                        }
                        Some(_) => eta *= 0.5,
                        None => break,
                    }
                }
            } else {
                let prox_transform = |proposal: Vec<f64>| {
                    let mut shrunk: Vec<f64> = proposal
                        .iter()
                        .zip(x)
                        .map(|(v, a)| a + soft_threshold(v - a, self.step * self.beta))
                        .collect();
                    clip01(&mut shrunk);
                    project_one_hot(&mut shrunk, &request.layout);
                    shrunk
                };
                let mut loss_fn =
                    |z: &[f64]| self.loss(&mut session, x, z, &proto, y_target);
                accepted = perturbation_step(
                    &current,
                    current_loss,
                    &mut rng,
                    &prox_transform,
                    &mut loss_fn,
                );
            }

            match accepted {
                Some((cand, l)) => {
                    previous = std::mem::replace(&mut current, cand);
                    current_loss = l;
                    momentum = t_next;
                    let Some(class) = session.class(&current) else {
                        break;
                    };
                    if class == y_target
                        && best_valid.as_ref().map_or(true, |(bl, _)| current_loss < *bl)
                    {
                        best_valid = Some((current_loss, current.clone()));
                    }
                }
                None => break,
            }
        }

        let outcome = match best_valid {
            Some((_, cand)) => CounterfactualOutcome {
                found: true,
                candidates: vec![cand],
                evaluations: session.evaluations(),
                seconds: start.elapsed().as_secs_f64(),
                algorithm: Algorithm::Prototype,
                partial: false,
            },
            None => {
                let mut o =
                    CounterfactualOutcome::not_found(Algorithm::Prototype, session.evaluations());
                o.seconds = start.elapsed().as_secs_f64();
                o
            }
        };
        Ok(outcome)
    }
}
