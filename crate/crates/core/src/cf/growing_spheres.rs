//! Growing-spheres search: uniform sampling in expanding spherical shells
//! around the instance until the predicted class flips, followed by a greedy
//! feature-reduction pass that reverts changed coordinates while the class
//! stays flipped.
//!
//! The cost being minimized is `||x - x'||_2 + gamma * ||x - x'||_0`. The
//! shell phase drives the L2 term; the reduction phase drives the L0 term
//! and is controlled by `gamma`: `gamma = 0` disables reduction entirely
//! (pure L2 behavior) and larger values allow more reduction passes.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cf::{clip01, Algorithm, CfRequest, CounterfactualOutcome, EvalSession, Generator};
use crate::error::{Error, Result};
use crate::models::Predictor;

#[derive(Debug, Clone)]
pub struct GrowingSpheres {
    pub eta0: f64,
    pub samples_per_shell: usize,
    pub gamma: f64,
    /// Search stops once the shell's inner radius exceeds
    /// `max_radius_factor * sqrt(d)`.
    pub max_radius_factor: f64,
}

impl Default for GrowingSpheres {
    fn default() -> Self {
        GrowingSpheres {
            eta0: 0.1,
            samples_per_shell: 1000,
            gamma: 1.0,
            max_radius_factor: 2.0,
        }
    }
}

impl GrowingSpheres {
    pub fn with_gamma(gamma: f64) -> Self {
        GrowingSpheres { gamma, ..GrowingSpheres::default() }
    }

    /// Uniform point in the shell `lo < r <= hi` around `x`.
    fn sample_shell(
        x: &[f64],
        lo: f64,
        hi: f64,
        rng: &mut ChaCha8Rng,
    ) -> Vec<f64> {
        let d = x.len();
        let normal = StandardNormal;
        let mut dir: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        // radius density proportional to r^(d-1) for volume uniformity
        let u: f64 = rng.random::<f64>();
        let dd = d as f64;
        let r = (lo.powf(dd) + u * (hi.powf(dd) - lo.powf(dd))).powf(1.0 / dd);
        for v in dir.iter_mut() {
            *v *= r / norm;
        }
        let mut point: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
        clip01(&mut point);
        point
    }

    fn l2(x: &[f64], z: &[f64]) -> f64 {
        x.iter()
            .zip(z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Greedy reduction to a fixpoint: revert changed coordinates back to
    /// `x`'s values, smallest |delta| first, keeping the class flipped.
    /// Repeated passes catch coordinates that only become revertible after
    /// earlier ones.
    fn reduce(
        &self,
        session: &mut EvalSession,
        x: &[f64],
        mut z: Vec<f64>,
        y_target: u8,
    ) -> Vec<f64> {
        if self.gamma <= 0.0 {
            return z;
        }
        let max_passes = 8;
        for _ in 0..max_passes {
            let mut changed: Vec<(usize, f64)> = z
                .iter()
                .zip(x)
                .enumerate()
                .filter(|(_, (zi, xi))| (*zi - *xi).abs() > 1e-12)
                .map(|(j, (zi, xi))| (j, (zi - xi).abs()))
                .collect();
            changed.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let mut reverted = 0;
            for (j, _) in changed {
                let old = z[j];
                z[j] = x[j];
                match session.class(&z) {
                    Some(class) if class == y_target => reverted += 1,
                    Some(_) => z[j] = old,
                    None => {
                        z[j] = old;
                        return z;
                    }
                }
            }
            if reverted == 0 {
                break;
            }
        }
        z
    }
}

impl Generator for GrowingSpheres {
    fn algorithm(&self) -> Algorithm {
        Algorithm::GrowingSpheres
    }

    fn generate(&self, request: &CfRequest, predictor: &Predictor) -> Result<CounterfactualOutcome> {
        request.validate(predictor)?;
        if request.layout.has_one_hot() {
            return Err(Error::InvalidConfig(
                "this generator requires a numerical-only schema".into(),
            ));
        }
        let start = std::time::Instant::now();
        let mut session = EvalSession::new(predictor, request.budget);
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        let x = &request.x;
        let y_target = request.y_target;

        let finish = |found: bool, candidates: Vec<Vec<f64>>, session: &EvalSession| {
            CounterfactualOutcome {
                found,
                candidates,
                evaluations: session.evaluations(),
                seconds: start.elapsed().as_secs_f64(),
                algorithm: Algorithm::GrowingSpheres,
                partial: false,
            }
        };

        // degenerate case: x is already past the boundary
        match session.class(x) {
            Some(class) if class == y_target => {
                return Ok(finish(true, vec![x.clone()], &session));
            }
            None => return Ok(finish(false, Vec::new(), &session)),
            _ => {}
        }

        let max_radius = self.max_radius_factor * (x.len() as f64).sqrt();
        let mut lo = 0.0;
        let mut hi = self.eta0;
        let mut hit: Option<Vec<f64>> = None;
        'shells: while lo <= max_radius {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..self.samples_per_shell {
                let point = Self::sample_shell(x, lo, hi, &mut rng);
                let Some(class) = session.class(&point) else {
                    // budget exhausted: keep the best flip seen so far
                    hit = best.map(|(_, p)| p);
                    break 'shells;
                };
                if class == y_target {
                    let d = Self::l2(x, &point);
                    if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                        best = Some((d, point));
                    }
                }
            }
            if let Some((_, point)) = best {
                hit = Some(point);
                break;
            }
            lo = hi;
            hi *= 2.0;
        }

        let Some(z) = hit else {
            return Ok(finish(false, Vec::new(), &session));
        };
        let reduced = self.reduce(&mut session, x, z, y_target);
        Ok(finish(true, vec![reduced], &session))
    }
}
