//! Stochastic perturbation fallback for piecewise-constant models.
//!
//! When the soft gradient is zero (trees, forests), the generators sample
//! 50 isotropic Gaussian directions at sigma = 0.05 in scaled space and move
//! to the best-loss candidate. If no direction improves the loss, sigma is
//! doubled a few times so the search can jump across flat plateaus wider
//! than one step.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub(crate) const N_DIRECTIONS: usize = 50;
pub(crate) const SIGMA0: f64 = 0.05;
pub(crate) const ESCALATIONS: u32 = 5;

/// One perturbation move. `transform` maps a raw proposal into a feasible
/// candidate (clipping, one-hot projection, freezing); `loss` returns `None`
/// when the evaluation budget is exhausted.
///
/// Returns the best strictly improving `(candidate, loss)`, or `None` when
/// every scale fails to improve or the budget runs out first.
pub(crate) fn perturbation_step(
    current: &[f64],
    current_loss: f64,
    rng: &mut ChaCha8Rng,
    transform: &dyn Fn(Vec<f64>) -> Vec<f64>,
    loss: &mut dyn FnMut(&[f64]) -> Option<f64>,
) -> Option<(Vec<f64>, f64)> {
    let normal = StandardNormal;
    for escalation in 0..ESCALATIONS {
        let sigma = SIGMA0 * f64::powi(2.0, escalation as i32);
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..N_DIRECTIONS {
            let proposal: Vec<f64> = current
                .iter()
                .map(|v| {
                    let step: f64 = normal.sample(rng);
                    v + sigma * step
                })
                .collect();
            let candidate = transform(proposal);
            let Some(l) = loss(&candidate) else {
                return best.filter(|(_, bl)| *bl < current_loss - 1e-12);
            };
            if l < current_loss - 1e-12
                && best.as_ref().map_or(true, |(_, bl)| l < *bl)
            {
                best = Some((candidate, l));
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}
