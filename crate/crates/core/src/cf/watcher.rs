//! Distance-loss counterfactual search: minimizes
//! `lambda * (f(x') - y')^2 + sum_j |x_j - x'_j| / MAD_j`
//! with the trade-off weight swept upward until the prediction sits within
//! `epsilon` of the target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cf::perturb::perturbation_step;
use crate::cf::{clip01, Algorithm, CfRequest, CounterfactualOutcome, EvalSession, Generator};
use crate::error::{Error, Result};
use crate::models::Predictor;

#[derive(Debug, Clone)]
pub struct WatcherCf {
    pub lambda_schedule: Vec<f64>,
    pub epsilon: f64,
    pub max_iters_per_lambda: usize,
    mad_weights: Vec<f64>,
}

impl WatcherCf {
    pub fn new(mad_weights: Vec<f64>) -> Self {
        WatcherCf {
            lambda_schedule: vec![0.1, 1.0, 10.0, 100.0, 1000.0],
            epsilon: 0.05,
            max_iters_per_lambda: 60,
            mad_weights,
        }
    }

    fn distance(&self, x: &[f64], z: &[f64]) -> f64 {
        x.iter()
            .zip(z)
            .zip(&self.mad_weights)
            .map(|((a, b), m)| (a - b).abs() / m)
            .sum()
    }

    fn loss(
        &self,
        session: &mut EvalSession,
        x: &[f64],
        z: &[f64],
        y_target: u8,
        lambda: f64,
    ) -> Option<f64> {
        let p1 = session.proba(z)?[1];
        let pred = p1 - y_target as f64;
        Some(lambda * pred * pred + self.distance(x, z))
    }

    /// Refines the candidate along the segment from `x`: a coarse grid then a
    /// bisection toward the left edge of the best loss basin, which pulls the
    /// candidate back to the decision boundary when that lowers the loss.
    fn refine_segment(
        &self,
        session: &mut EvalSession,
        x: &[f64],
        z: &[f64],
        y_target: u8,
        lambda: f64,
    ) -> Vec<f64> {
        let at = |t: f64| -> Vec<f64> {
            x.iter().zip(z).map(|(a, b)| a + t * (b - a)).collect()
        };
        let mut best_t = 1.0;
        let Some(mut best_loss) = self.loss(session, x, z, y_target, lambda) else {
            return z.to_vec();
        };
        let grid = 64;
        for k in 1..grid {
            let t = k as f64 / grid as f64;
            let cand = at(t);
            let Some(l) = self.loss(session, x, &cand, y_target, lambda) else {
                return at(best_t);
            };
            if l < best_loss - 1e-12 {
                best_loss = l;
                best_t = t;
            }
        }
        let mut lo = (best_t - 1.0 / grid as f64).max(0.0);
        let mut hi = best_t;
        for _ in 0..25 {
            let mid = 0.5 * (lo + hi);
            let cand = at(mid);
            let Some(l) = self.loss(session, x, &cand, y_target, lambda) else {
                break;
            };
            if l <= best_loss + 1e-12 {
                best_loss = l.min(best_loss);
                hi = mid;
            } else {
                lo = mid;
            }
        }
        at(hi)
    }
}

impl Generator for WatcherCf {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Watcher
    }

    fn generate(&self, request: &CfRequest, predictor: &Predictor) -> Result<CounterfactualOutcome> {
        request.validate(predictor)?;
        if request.layout.has_one_hot() {
            return Err(Error::InvalidConfig(
                "this generator requires a numerical-only schema".into(),
            ));
        }
        if self.mad_weights.len() != request.x.len() {
            return Err(Error::DimensionMismatch {
                expected: request.x.len(),
                got: self.mad_weights.len(),
            });
        }
        let start = std::time::Instant::now();
        let mut session = EvalSession::new(predictor, request.budget);
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        let x = &request.x;
        let y_target = request.y_target;

        // best candidate per lambda, warm-starting the next sweep step
        let mut per_lambda: Vec<(f64, Vec<f64>, f64)> = Vec::new();
        let mut current = x.clone();
        'sweep: for &lambda in &self.lambda_schedule {
            let Some(mut current_loss) = self.loss(&mut session, x, &current, y_target, lambda)
            else {
                break 'sweep;
            };
            for _ in 0..self.max_iters_per_lambda {
                let Some(grad_p) = session.gradient(&current, 1) else {
                    break;
                };
                let grad_norm: f64 = grad_p.iter().map(|g| g * g).sum::<f64>().sqrt();
                let mut moved = false;
                if grad_norm > 1e-12 {
                    let Some(p1) = session.proba(&current).map(|p| p[1]) else {
                        break;
                    };
                    let pred = p1 - y_target as f64;
                    let grad: Vec<f64> = grad_p
                        .iter()
                        .zip(current.iter().zip(x))
                        .zip(&self.mad_weights)
                        .map(|((g, (c, xi)), m)| {
                            let sub = if (c - xi).abs() > 1e-15 {
                                (c - xi).signum() / m
                            } else {
                                0.0
                            };
                            2.0 * lambda * pred * g + sub
                        })
                        .collect();
                    let mut eta = 0.2;
                    for _ in 0..8 {
                        let mut cand: Vec<f64> = current
                            .iter()
                            .zip(&grad)
                            .map(|(c, g)| c - eta * g)
                            .collect();
                        clip01(&mut cand);
                        match self.loss(&mut session, x, &cand, y_target, lambda) {
                            Some(l) if l < current_loss - 1e-12 => {
                                current = cand;
                                current_loss = l;
                                moved = true;
                                break;
                            }
                            Some(_) => eta *= 0.5,
                            None => break,
                        }
                    }
                }
                if !moved {
                    let transform = |mut proposal: Vec<f64>| {
                        clip01(&mut proposal);
                        proposal
                    };
                    let mut loss_fn = |z: &[f64]| self.loss(&mut session, x, z, y_target, lambda);
                    match perturbation_step(&current, current_loss, &mut rng, &transform, &mut loss_fn)
                    {
                        Some((cand, l)) => {
                            current = cand;
                            current_loss = l;
                        }
                        None => break,
                    }
                }
            }
            let refined = self.refine_segment(&mut session, x, &current, y_target, lambda);
            let p_refined = match session.proba(&refined) {
                Some(p) => p,
                None => {
                    per_lambda.push((lambda, refined, f64::NAN));
                    break 'sweep;
                }
            };
            per_lambda.push((lambda, refined.clone(), p_refined[1]));
            current = refined;
        }

        // Accept the largest lambda whose optimum predicts within epsilon of
        // the target; otherwise fall back to the closest class-flipped
        // candidate seen across the sweep.
        let flipped = |p1: f64| -> bool {
            let class = if 1.0 - p1 >= p1 { 0u8 } else { 1 };
            class == y_target
        };
        let chosen = per_lambda
            .iter()
            .rev()
            .find(|(_, _, p1)| {
                p1.is_finite() && (p1 - y_target as f64).abs() <= self.epsilon && flipped(*p1)
            })
            .or_else(|| {
                per_lambda
                    .iter()
                    .filter(|(_, _, p1)| p1.is_finite() && flipped(*p1))
                    .min_by(|a, b| {
                        self.distance(x, &a.1)
                            .partial_cmp(&self.distance(x, &b.1))
                            .unwrap()
                    })
            });

        let mut outcome = match chosen {
            Some((_, candidate, _)) => CounterfactualOutcome {
                found: true,
                candidates: vec![candidate.clone()],
                evaluations: session.evaluations(),
                seconds: 0.0,
                algorithm: Algorithm::Watcher,
                partial: false,
            },
            None => CounterfactualOutcome::not_found(Algorithm::Watcher, session.evaluations()),
        };
        outcome.seconds = start.elapsed().as_secs_f64();
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DecisionTree, TreeParams};
    use ndarray::array;

    /// 1-feature model: class 1 iff x > 0.5.
    fn threshold_tree() -> Predictor {
        let x = array![[0.0], [1.0]];
        let y = [0u8, 1];
        Predictor::Tree(DecisionTree::fit(
            &x,
            &y,
            &[0, 1],
            TreeParams { max_depth: 1, min_leaf: 1, mtry: None },
            None,
        ))
    }

    #[test]
    fn identity_candidate_has_zero_distance_and_positive_prediction_term() {
        let gen = WatcherCf::new(vec![1.0]);
        let predictor = threshold_tree();
        let x = vec![0.2];
        let mut session = EvalSession::new(&predictor, 100);
        let loss = gen.loss(&mut session, &x, &x, 1, 10.0).unwrap();
        // distance term is 0; prediction term is lambda * (0 - 1)^2
        assert!((loss - 10.0).abs() < 1e-12);
        assert_eq!(gen.distance(&x, &x), 0.0);
    }

    #[test]
    fn threshold_model_lands_just_across_the_boundary() {
        let gen = WatcherCf::new(vec![1.0]);
        let predictor = threshold_tree();
        let request = CfRequest::numeric(vec![0.2], 1, 77);
        let outcome = gen.generate(&request, &predictor).unwrap();
        assert!(outcome.found);
        let got = outcome.candidates[0][0];

        // independent oracle: grid search over [0,1] at resolution 1e-4 on
        // the full loss at the largest schedule lambda
        let lambda = 1000.0;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=10_000 {
            let z = k as f64 * 1e-4;
            let p1 = predictor.predict_proba(&[z]).unwrap()[1];
            let loss = lambda * (p1 - 1.0) * (p1 - 1.0) + (z - 0.2).abs();
            if loss < best.0 {
                best = (loss, z);
            }
        }
        assert!(
            (got - best.1).abs() < 2e-2,
            "candidate {got} vs grid optimum {}",
            best.1
        );
        assert!(got > 0.5, "must cross the boundary, got {got}");
        assert_eq!(predictor.predict_class(&[got]).unwrap(), 1);
    }

    #[test]
    fn rejects_one_hot_schemas() {
        use crate::data::{FeatureSchema, FeatureSpec};
        let schema = FeatureSchema::new(
            "y",
            vec![FeatureSpec::categorical("c", &["a", "b"])],
        )
        .unwrap();
        let request = CfRequest {
            x: vec![1.0, 0.0],
            y_target: 1,
            layout: schema.layout(),
            immutable_mask: vec![false, false],
            budget: 100,
            seed: 0,
        };
        let predictor = {
            let x = array![[1.0, 0.0], [0.0, 1.0]];
            let y = [0u8, 1];
            Predictor::Tree(DecisionTree::fit(
                &x,
                &y,
                &[0, 1],
                TreeParams { max_depth: 1, min_leaf: 1, mtry: None },
                None,
            ))
        };
        let gen = WatcherCf::new(vec![1.0, 1.0]);
        assert!(matches!(
            gen.generate(&request, &predictor),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn deterministic_under_identical_requests() {
        let gen = WatcherCf::new(vec![1.0]);
        let predictor = threshold_tree();
        let request = CfRequest::numeric(vec![0.2], 1, 5);
        let a = gen.generate(&request, &predictor).unwrap();
        let b = gen.generate(&request, &predictor).unwrap();
        assert_eq!(a.candidates, b.candidates);
        assert_eq!(a.evaluations, b.evaluations);
    }
}
