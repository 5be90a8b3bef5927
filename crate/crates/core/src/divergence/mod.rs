//! Bregman divergences between discrete distributions and between diagonal
//! Gaussians under Tsallis regularization, plus numeric oracles.

mod gaussian;
mod heatmap;
mod oracle;

pub use gaussian::{
    gaussian_bregman_tsallis, gaussian_kl, gaussian_reward_baseline, gaussian_tsallis_entropy, DiagGaussian,
};
pub use heatmap::{heatmap_grid, Heatmap};
pub use oracle::{adaptive_simpson, numeric_entropy_oracle, numeric_oracle, OracleMethod, OracleTarget};

use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;
use crate::regularizer::{check_distribution, RegularizerSpec};

/// `λ(E_{p1}[f_φ'(p2) − φ(p1)] − E_{p2}[f_φ'(p2) − φ(p2)])`.
///
/// Zero entries use the analytic limits; under Shannon an action with
/// `p2(a) = 0 < p1(a)` is a support mismatch.
pub fn bregman_discrete(p1: &[f64], p2: &[f64], spec: &RegularizerSpec) -> Result<f64> {
    check_distribution(p1)?;
    check_distribution(p2)?;
    if p1.len() != p2.len() {
        return Err(Error::Parameter(format!(
            "distributions have lengths {} and {}",
            p1.len(),
            p2.len()
        )));
    }
    let mut acc = 0.0;
    for (a, (&x, &y)) in p1.iter().zip(p2).enumerate() {
        if x > 0.0 {
            let fy = if y > 0.0 {
                spec.f_prime_raw(y)
            } else {
                spec.f_phi_prime_at_zero().ok_or(Error::SupportMismatch { action: a })?
            };
            acc += x * fy - spec.f_phi(x);
        }
        if y > 0.0 {
            acc -= y * spec.f_prime_raw(y) - spec.f_phi(y);
        }
    }
    Ok(spec.lambda() * acc)
}

/// Average of [`bregman_discrete`] between policy and expert rows over
/// `eval_states`.
pub fn mean_bregman(
    policy: &TabularPolicy,
    expert: &TabularPolicy,
    eval_states: &[usize],
    spec: &RegularizerSpec,
) -> Result<f64> {
    if eval_states.is_empty() {
        return Err(Error::Parameter(
            "mean Bregman divergence needs at least one state".into(),
        ));
    }
    let mut total = 0.0;
    for &s in eval_states {
        if s >= policy.n_states() || s >= expert.n_states() {
            return Err(Error::Index(format!("evaluation state {s}")));
        }
        total += bregman_discrete(policy.row(s), expert.row(s), spec)?;
    }
    Ok(total / eval_states.len() as f64)
}
