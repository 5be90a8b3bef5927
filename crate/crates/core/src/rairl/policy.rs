//! Policy improvement for the adversarial loop and the behavioral-cloning
//! baseline.

use serde::{Deserialize, Serialize};

use super::model::softmax;
use crate::envs::{DemoSet, Transition};
use crate::error::{Error, Result};
use crate::irl::RewardTable;
use crate::mdp::{value_iteration_in_place, TabularMdp, TabularPolicy};
use crate::regularizer::{Family, RegularizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Exact regularized value iteration on the current reward.
    ExactVi,
    /// TD critic plus softmax actor on sampled transitions.
    SampledRac,
}

/// `⟨p, q⟩ − Ω(p)` with `p = softmax(logits)`.
pub fn actor_objective(logits: &[f64], q_row: &[f64], spec: &RegularizerSpec) -> f64 {
    let p = softmax(logits);
    let ev: f64 = p.iter().zip(q_row).map(|(a, b)| a * b).sum();
    ev - spec.omega_raw(&p)
}

/// Gradient of [`actor_objective`] in the logits:
/// `p_b (h_b − ⟨p, h⟩)` with `h = q + λ f_φ'(p)`.
pub fn actor_gradient(logits: &[f64], q_row: &[f64], spec: &RegularizerSpec) -> Vec<f64> {
    let p = softmax(logits);
    let lambda = spec.lambda();
    let h: Vec<f64> = match spec.family() {
        // log-softmax keeps −ln p finite when p underflows
        Family::Shannon => {
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            q_row
                .iter()
                .zip(logits)
                .map(|(q, l)| q + lambda * (lse - l - 1.0))
                .collect()
        }
        _ => q_row
            .iter()
            .zip(&p)
            .map(|(q, &x)| q + lambda * spec.f_prime_raw(x))
            .collect(),
    };
    let mean: f64 = p.iter().zip(&h).map(|(a, b)| a * b).sum();
    p.iter().zip(&h).map(|(pb, hb)| pb * (hb - mean)).collect()
}

/// Mode-specific learner state carried across iterations.
#[derive(Debug, Clone)]
pub enum PolicyLearner {
    ExactVi {
        /// Warm start for the next value iteration.
        values: Option<Vec<f64>>,
        tol: f64,
    },
    SampledRac {
        logits: Vec<Vec<f64>>,
        critic: Vec<Vec<f64>>,
        critic_lr: f64,
        actor_lr: f64,
    },
}

impl PolicyLearner {
    pub fn exact(tol: f64) -> Self {
        PolicyLearner::ExactVi { values: None, tol }
    }

    pub fn sampled(n_states: usize, n_actions: usize, critic_lr: f64, actor_lr: f64) -> Self {
        PolicyLearner::SampledRac {
            logits: vec![vec![0.0; n_actions]; n_states],
            critic: vec![vec![0.0; n_actions]; n_states],
            critic_lr,
            actor_lr,
        }
    }

    /// Current policy (uniform before any update in sampled mode).
    pub fn policy(&self, n_states: usize, n_actions: usize) -> TabularPolicy {
        match self {
            PolicyLearner::ExactVi { .. } => TabularPolicy::uniform(n_states, n_actions),
            PolicyLearner::SampledRac { logits, .. } => {
                TabularPolicy::new(logits.iter().map(|l| softmax(l)).collect()).expect("softmax rows")
            }
        }
    }

    /// One improvement step against `reward`. Exact mode solves the
    /// regularized problem; sampled mode runs one critic sweep and one actor
    /// step over `batch`.
    pub fn improve(
        &mut self,
        reward: &RewardTable,
        mdp: &TabularMdp,
        spec: &RegularizerSpec,
        batch: &[Transition],
    ) -> Result<TabularPolicy> {
        match self {
            PolicyLearner::ExactVi { values, tol } => {
                let sol = value_iteration_in_place(mdp, reward.rows(), spec, *tol, values.as_deref())?;
                *values = Some(sol.v_values);
                Ok(sol.policy)
            }
            PolicyLearner::SampledRac {
                logits,
                critic,
                critic_lr,
                actor_lr,
            } => {
                let gamma = mdp.gamma();
                for tr in batch {
                    let next = tr.next_state;
                    let p = softmax(&logits[next]);
                    let v_next: f64 = p.iter().zip(&critic[next]).map(|(a, b)| a * b).sum::<f64>() - spec.omega_raw(&p);
                    let target = reward.get(tr.state, tr.action) + gamma * v_next;
                    let q = &mut critic[tr.state][tr.action];
                    *q += *critic_lr * (target - *q);
                }
                let scale = 1.0 / batch.len().max(1) as f64;
                for tr in batch {
                    let g = actor_gradient(&logits[tr.state], &critic[tr.state], spec);
                    for (l, d) in logits[tr.state].iter_mut().zip(g) {
                        *l += *actor_lr * scale * d;
                    }
                }
                Ok(self.policy(mdp.n_states(), mdp.n_actions()))
            }
        }
    }
}

/// Optimal policy for `reward` (exact mode) or one sampled actor-critic
/// step from `learner`'s state.
pub fn policy_improvement(
    learner: &mut PolicyLearner,
    reward: &RewardTable,
    mdp: &TabularMdp,
    spec: &RegularizerSpec,
    batch: &[Transition],
) -> Result<TabularPolicy> {
    learner.improve(reward, mdp, spec, batch)
}

/// Per-state empirical action frequencies with additive smoothing;
/// unvisited states get uniform rows.
pub fn behavioral_cloning(demos: &DemoSet, n_states: usize, n_actions: usize, smoothing: f64) -> Result<TabularPolicy> {
    if demos.pairs.is_empty() {
        return Err(Error::Parameter("behavioral cloning needs demonstrations".into()));
    }
    if !(smoothing >= 0.0) {
        return Err(Error::Parameter(format!(
            "smoothing must be non-negative, got {smoothing}"
        )));
    }
    let mut counts = vec![vec![0.0; n_actions]; n_states];
    for &(s, a) in &demos.pairs {
        if s >= n_states || a >= n_actions {
            return Err(Error::Index(format!("demo pair ({s}, {a})")));
        }
        counts[s][a] += 1.0;
    }
    let rows = counts
        .into_iter()
        .map(|row| {
            let n: f64 = row.iter().sum();
            if n == 0.0 {
                vec![1.0 / n_actions as f64; n_actions]
            } else {
                let z = n + smoothing * n_actions as f64;
                row.iter().map(|c| (c + smoothing) / z).collect()
            }
        })
        .collect();
    TabularPolicy::new(rows)
}
