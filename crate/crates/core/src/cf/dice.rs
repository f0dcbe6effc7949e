//! Diverse counterfactual generation: jointly optimizes k candidates under
//!
//! `(1/k) sum yloss(f(c_i), y') + (lambda1/k) sum dist(c_i, x)
//!  - lambda2 * dpp_diversity(c_1..c_k)`
//!
//! where `dist` is the MAD-normalized L1 distance and the diversity term is
//! `det(K)` with `K_ij = 1 / (1 + dist(c_i, c_j))`. Immutable coordinates
//! stay frozen at the instance's values in every candidate, and one-hot
//! groups are projected to valid vertices after every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cf::perturb::perturbation_step;
use crate::cf::{
    clip01, freeze, project_one_hot, Algorithm, CfRequest, CounterfactualOutcome, EvalSession,
    Generator,
};
use crate::error::{Error, Result};
use crate::models::Predictor;

#[derive(Debug, Clone)]
pub struct Dice {
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub max_iters: usize,
    /// Post-hoc sparsity pass: changed features with scaled magnitude at or
    /// below this threshold are restored to the instance's values while the
    /// class stays flipped.
    pub restore_threshold: f64,
    mad_weights: Vec<f64>,
}

impl Dice {
    pub fn new(mad_weights: Vec<f64>) -> Self {
        Dice {
            k: 4,
            lambda1: 0.5,
            lambda2: 1.0,
            max_iters: 40,
            restore_threshold: 0.03,
            mad_weights,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        assert!(k >= 1);
        self.k = k;
        self
    }

    fn mad_l1(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.mad_weights)
            .map(|((p, q), m)| (p - q).abs() / m)
            .sum()
    }

    fn yloss_from_proba(p_target: f64) -> f64 {
        let p = p_target.clamp(1e-7, 1.0 - 1e-7);
        let z = (p / (1.0 - p)).ln();
        (1.0 - z).max(0.0)
    }
}

/// Determinant of the diversity kernel `K_ij = 1/(1 + dist(c_i, c_j))` with
/// the MAD-normalized L1 distance. One candidate gives 1.0; identical
/// candidates drive the determinant to 0.
pub fn dpp_diversity(candidates: &[Vec<f64>], mad_weights: &[f64]) -> f64 {
    let k = candidates.len();
    let mut kernel = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let dist: f64 = candidates[i]
                .iter()
                .zip(&candidates[j])
                .zip(mad_weights)
                .map(|((a, b), m)| (a - b).abs() / m)
                .sum();
            kernel[i][j] = 1.0 / (1.0 + dist);
        }
    }
    det(&kernel)
}

/// Determinant by LU decomposition with partial pivoting.
fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut result = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            result = -result;
        }
        result *= a[col][col];
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    result
}

/// Inverse by Gauss-Jordan; `None` for singular matrices.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(pivot, col);
        inv.swap(pivot, col);
        let d = a[col][col];
        for c in 0..n {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                for c in 0..n {
                    a[row][c] -= f * a[col][c];
                    inv[row][c] -= f * inv[col][c];
                }
            }
        }
    }
    Some(inv)
}

struct State {
    cands: Vec<Vec<f64>>,
    p_target: Vec<f64>,
    dists: Vec<f64>,
    kernel: Vec<Vec<f64>>,
}

impl State {
    fn joint(&self, gen: &Dice) -> f64 {
        let k = self.cands.len() as f64;
        let yloss: f64 = self.p_target.iter().map(|&p| Dice::yloss_from_proba(p)).sum();
        let dist: f64 = self.dists.iter().sum();
        yloss / k + gen.lambda1 * dist / k - gen.lambda2 * det(&self.kernel)
    }
}

impl Generator for Dice {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Dice
    }

    fn generate(&self, request: &CfRequest, predictor: &Predictor) -> Result<CounterfactualOutcome> {
        request.validate(predictor)?;
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
        let k = self.k;

        let transform = |mut proposal: Vec<f64>| {
            clip01(&mut proposal);
            project_one_hot(&mut proposal, &request.layout);
            freeze(&mut proposal, x, &request.immutable_mask);
            proposal
        };

        // distinct seeded starting points around x
        let normal = StandardNormal;
        let mut state = State {
            cands: Vec::with_capacity(k),
            p_target: Vec::with_capacity(k),
            dists: Vec::with_capacity(k),
            kernel: vec![vec![0.0; k]; k],
        };
        for _ in 0..k {
            let proposal: Vec<f64> = x
                .iter()
                .map(|v| {
                    let step: f64 = normal.sample(&mut rng);
                    v + 0.1 * step
                })
                .collect();
            let cand = transform(proposal);
            let p = match session.proba(&cand) {
                Some(p) => p[y_target as usize],
                None => 0.0,
            };
            state.dists.push(self.mad_l1(x, &cand));
            state.p_target.push(p);
            state.cands.push(cand);
        }
        for i in 0..k {
            for j in 0..k {
                state.kernel[i][j] = 1.0 / (1.0 + self.mad_l1(&state.cands[i], &state.cands[j]));
            }
        }

        let mut joint = state.joint(self);
        'outer: for _ in 0..self.max_iters {
            let mut improved = false;
            for i in 0..k {
                if session.exhausted() {
                    break 'outer;
                }
                let candidate = state.cands[i].clone();
                let mut proposal_best: Option<(Vec<f64>, f64, f64)> = None; // cand, p_target, joint

                let mut try_candidate = |cand: Vec<f64>,
                                         session: &mut EvalSession|
                 -> Option<f64> {
                    let p = session.proba(&cand)?[y_target as usize];
                    let mut trial_kernel = state.kernel.clone();
                    for j in 0..k {
                        let v = if i == j {
                            1.0
                        } else {
                            1.0 / (1.0 + self.mad_l1(&cand, &state.cands[j]))
                        };
                        trial_kernel[i][j] = v;
                        trial_kernel[j][i] = v;
                    }
                    let yloss: f64 = state
                        .p_target
                        .iter()
                        .enumerate()
                        .map(|(j, &pj)| {
                            Dice::yloss_from_proba(if j == i { p } else { pj })
                        })
                        .sum();
                    let dist: f64 = state
                        .dists
                        .iter()
                        .enumerate()
                        .map(|(j, &dj)| if j == i { self.mad_l1(x, &cand) } else { dj })
                        .sum();
                    let trial_joint = yloss / k as f64 + self.lambda1 * dist / k as f64
                        - self.lambda2 * det(&trial_kernel);
                    proposal_best = match proposal_best.take() {
                        Some(best) if best.2 <= trial_joint => Some(best),
                        _ => Some((cand, p, trial_joint)),
                    };
                    Some(trial_joint)
                };

                let grad_model = match session.gradient(&candidate, y_target) {
                    Some(g) => g,
                    None => break 'outer,
                };
                let grad_norm: f64 = grad_model.iter().map(|g| g * g).sum::<f64>().sqrt();
                if grad_norm > 1e-12 {
                    // analytic joint gradient w.r.t. candidate i
                    let p = state.p_target[i].clamp(1e-7, 1.0 - 1e-7);
                    let z = (p / (1.0 - p)).ln();
                    let dyloss_dp = if z < 1.0 { -1.0 / (p * (1.0 - p)) } else { 0.0 };
                    let kinv = invert(&state.kernel);
                    let det_k = det(&state.kernel);
                    let mut grad = vec![0.0; x.len()];
                    for (j, g) in grad.iter_mut().enumerate() {
                        let mut v = dyloss_dp * grad_model[j] / k as f64;
                        let diff = candidate[j] - x[j];
                        if diff.abs() > 1e-15 {
                            v += self.lambda1 * diff.signum() / (self.mad_weights[j] * k as f64);
                        }
                        if let Some(kinv) = &kinv {
                            let mut ddet = 0.0;
                            for m in 0..k {
                                if m == i {
                                    continue;
                                }
                                let dm = candidate[j] - state.cands[m][j];
                                if dm.abs() > 1e-15 {
                                    let kim = state.kernel[i][m];
                                    ddet += 2.0
                                        * det_k
                                        * kinv[i][m]
                                        * (-kim * kim * dm.signum() / self.mad_weights[j]);
                                }
                            }
                            v -= self.lambda2 * ddet;
                        }
                        *g = v;
                    }
                    let mut eta = 0.2;
                    for _ in 0..6 {
                        let proposal: Vec<f64> = candidate
                            .iter()
                            .zip(&grad)
                            .map(|(c, g)| c - eta * g)
                            .collect();
                        match try_candidate(transform(proposal), &mut session) {
                            Some(l) if l < joint - 1e-12 => break,
                            Some(_) => eta *= 0.5,
                            None => break 'outer,
                        }
                    }
                } else {
                    // piecewise-constant model: perturbation fallback
                    let mut loss_fn =
                        |z: &[f64]| try_candidate(z.to_vec(), &mut session);
                    let _ = perturbation_step(&candidate, joint, &mut rng, &transform, &mut loss_fn);
                }

                if let Some((cand, p, trial_joint)) = proposal_best {
                    if trial_joint < joint - 1e-12 {
                        state.dists[i] = self.mad_l1(x, &cand);
                        state.p_target[i] = p;
                        for j in 0..k {
                            let v = if i == j {
                                1.0
                            } else {
                                1.0 / (1.0 + self.mad_l1(&cand, &state.cands[j]))
                            };
                            state.kernel[i][j] = v;
                            state.kernel[j][i] = v;
                        }
                        state.cands[i] = cand;
                        joint = trial_joint;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }

        // feasibility phase: when the joint-loss optimum leaves every
        // candidate short of the boundary (the distance pull can dominate
        // the hinge for interior instances), push the most advanced
        // candidate along pure prediction gain until it flips
        if state.p_target.iter().all(|&p| p <= 0.5) && !session.exhausted() {
            let best_i = (0..k)
                .max_by(|&a, &b| state.p_target[a].partial_cmp(&state.p_target[b]).unwrap())
                .unwrap_or(0);
            let mut cand = state.cands[best_i].clone();
            let mut p_now = state.p_target[best_i];
            for _ in 0..200 {
                if p_now > 0.5 || session.exhausted() {
                    break;
                }
                let Some(grad) = session.gradient(&cand, y_target) else {
                    break;
                };
                let grad_norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                let mut moved = false;
                if grad_norm > 1e-12 {
                    let mut eta = 0.2;
                    for _ in 0..6 {
                        let proposal: Vec<f64> = cand
                            .iter()
                            .zip(&grad)
                            .map(|(c, g)| c + eta * g)
                            .collect();
                        let trial = transform(proposal);
                        let Some(p) = session.proba(&trial) else { break };
                        let p = p[y_target as usize];
                        if p > p_now + 1e-12 {
                            cand = trial;
                            p_now = p;
                            moved = true;
                            break;
                        }
                        eta *= 0.5;
                    }
                }
                if !moved {
                    let mut loss_fn = |z: &[f64]| {
                        session.proba(z).map(|p| -p[y_target as usize])
                    };
                    match perturbation_step(&cand, -p_now, &mut rng, &transform, &mut loss_fn) {
                        Some((better, neg_p)) => {
                            cand = better;
                            p_now = -neg_p;
                        }
                        None => break,
                    }
                }
            }
            if p_now > 0.5 {
                state.cands[best_i] = cand;
                state.p_target[best_i] = p_now;
            }
        }

        // keep the candidates whose class actually flipped
        let mut valid: Vec<Vec<f64>> = state
            .cands
            .iter()
            .zip(&state.p_target)
            .filter(|(_, &p)| p > 0.5)
            .map(|(c, _)| c.clone())
            .collect();

        // proximity pullback: bisect each candidate toward x along its
        // segment, keeping the class flipped, so candidates end near the
        // boundary instead of wherever the push overshot to
        for cand in valid.iter_mut() {
            let mut lo = 0.0f64; // fraction toward x that breaks validity
            let mut hi = 1.0f64; // known-valid fraction (1 = candidate)
            for _ in 0..20 {
                let mid = 0.5 * (lo + hi);
                let probe: Vec<f64> = x
                    .iter()
                    .zip(cand.iter())
                    .map(|(a, b)| a + mid * (b - a))
                    .collect();
                let probe = transform(probe);
                match session.class(&probe) {
                    Some(class) if class == y_target => hi = mid,
                    Some(_) => lo = mid,
                    None => break,
                }
            }
            if hi < 1.0 {
                let pulled: Vec<f64> = x
                    .iter()
                    .zip(cand.iter())
                    .map(|(a, b)| a + hi * (b - a))
                    .collect();
                let pulled = transform(pulled);
                if session.class(&pulled) == Some(y_target) {
                    *cand = pulled;
                }
            }
        }

        // post-hoc sparsity: restore small changes while staying valid
        for cand in valid.iter_mut() {
            let mut groups: Vec<(usize, f64)> = request
                .layout
                .groups()
                .iter()
                .enumerate()
                .filter_map(|(gi, g)| {
                    let magnitude = g
                        .columns()
                        .map(|c| (cand[c] - x[c]).abs())
                        .fold(0.0f64, f64::max);
                    (magnitude > 1e-12).then_some((gi, magnitude))
                })
                .collect();
            groups.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            for (gi, magnitude) in groups {
                if magnitude > self.restore_threshold {
                    break;
                }
                let group = &request.layout.groups()[gi];
                let saved: Vec<f64> = group.columns().map(|c| cand[c]).collect();
                for c in group.columns() {
                    cand[c] = x[c];
                }
                match session.class(cand) {
                    Some(class) if class == y_target => {}
                    Some(_) => {
                        for (offset, c) in group.columns().enumerate() {
                            cand[c] = saved[offset];
                        }
                    }
                    None => {
                        for (offset, c) in group.columns().enumerate() {
                            cand[c] = saved[offset];
                        }
                        break;
                    }
                }
            }
        }

        let found = !valid.is_empty();
        let partial = found && valid.len() < k;
        Ok(CounterfactualOutcome {
            found,
            candidates: valid,
            evaluations: session.evaluations(),
            seconds: start.elapsed().as_secs_f64(),
            algorithm: Algorithm::Dice,
            partial,
        })
    }
}
