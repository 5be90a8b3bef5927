//! Reward models and the structured discriminator `σ(r(s,a) − t(s,a;π))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irl::{exact_irl_reward, RewardTable};
use crate::mdp::TabularPolicy;
use crate::regularizer::{Family, RegularizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModelKind {
    Nsm,
    Dbm,
}

/// Tabular reward model.
///
/// `Nsm` is a free table. `Dbm` computes
/// `r(s,a) = −λ f_φ'(softmax(θ_s)(a)) + B(s)`, so its implied policy is
/// row-stochastic by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardModel {
    Nsm {
        #[serde(rename = "nsm_table")]
        table: Vec<Vec<f64>>,
    },
    Dbm {
        #[serde(rename = "dbm_logits")]
        logits: Vec<Vec<f64>>,
        #[serde(rename = "dbm_baseline")]
        baseline: Vec<f64>,
    },
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

/// `−λ f_φ'(p)` for a softmax row, with Shannon evaluated in log space.
pub(crate) fn neg_grad_row(logits: &[f64], spec: &RegularizerSpec) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(logits);
    let lambda = spec.lambda();
    let r = match spec.family() {
        Family::Shannon => log_softmax(logits).iter().map(|lp| lambda * (lp + 1.0)).collect(),
        _ => p.iter().map(|&x| -lambda * spec.f_prime_raw(x)).collect(),
    };
    (p, r)
}

/// `∂(−λ f_φ'(p_a))/∂p_a · p_a = −λ f_φ''(p_a) p_a`.
fn chain_coeff(p: f64, spec: &RegularizerSpec) -> f64 {
    match spec.family() {
        Family::Shannon => spec.lambda(),
        _ => -spec.lambda() * spec.f_second_raw(p) * p,
    }
}

impl RewardModel {
    /// Zero table, or uniform logits with zero baseline.
    pub fn new(kind: RewardModelKind, n_states: usize, n_actions: usize) -> Self {
        match kind {
            RewardModelKind::Nsm => RewardModel::Nsm {
                table: vec![vec![0.0; n_actions]; n_states],
            },
            RewardModelKind::Dbm => RewardModel::Dbm {
                logits: vec![vec![0.0; n_actions]; n_states],
                baseline: vec![0.0; n_states],
            },
        }
    }

    pub fn kind(&self) -> RewardModelKind {
        match self {
            RewardModel::Nsm { .. } => RewardModelKind::Nsm,
            RewardModel::Dbm { .. } => RewardModelKind::Dbm,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            RewardModel::Nsm { table } => table.len(),
            RewardModel::Dbm { logits, .. } => logits.len(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            RewardModel::Nsm { table } => table[0].len(),
            RewardModel::Dbm { logits, .. } => logits[0].len(),
        }
    }

    fn check_index(&self, s: usize, a: usize) -> Result<()> {
        if s < self.n_states() && a < self.n_actions() {
            Ok(())
        } else {
            Err(Error::Index(format!("({s}, {a}) outside the reward model")))
        }
    }

    /// Reward row for one state.
    pub fn reward_row(&self, spec: &RegularizerSpec, s: usize) -> Result<Vec<f64>> {
        self.check_index(s, 0)?;
        Ok(match self {
            RewardModel::Nsm { table } => table[s].clone(),
            RewardModel::Dbm { logits, baseline } => {
                let (_, r) = neg_grad_row(&logits[s], spec);
                r.iter().map(|x| x + baseline[s]).collect()
            }
        })
    }

    pub fn reward_table(&self, spec: &RegularizerSpec) -> Result<RewardTable> {
        RewardTable::new(
            (0..self.n_states())
                .map(|s| self.reward_row(spec, s))
                .collect::<Result<_>>()?,
        )
    }

    /// Row-softmax of the DBM logits.
    pub fn implied_policy(&self) -> Option<TabularPolicy> {
        match self {
            RewardModel::Nsm { .. } => None,
            RewardModel::Dbm { logits, .. } => Some(
                TabularPolicy::new(logits.iter().map(|l| softmax(l)).collect()).expect("softmax rows are stochastic"),
            ),
        }
    }

    /// Parameters flattened in a fixed order (table, or logits then baseline).
    pub fn params(&self) -> Vec<f64> {
        match self {
            RewardModel::Nsm { table } => table.iter().flatten().copied().collect(),
            RewardModel::Dbm { logits, baseline } => logits.iter().flatten().chain(baseline.iter()).copied().collect(),
        }
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params().len() {
            return Err(Error::Parameter(format!(
                "expected {} parameters, got {}",
                self.params().len(),
                theta.len()
            )));
        }
        let mut it = theta.iter().copied();
        match self {
            RewardModel::Nsm { table } => table.iter_mut().flatten().for_each(|x| *x = it.next().unwrap()),
            RewardModel::Dbm { logits, baseline } => {
                logits.iter_mut().flatten().for_each(|x| *x = it.next().unwrap());
                baseline.iter_mut().for_each(|x| *x = it.next().unwrap());
            }
        }
        Ok(())
    }

    /// `θ += step · g` with `g` laid out as in [`RewardModel::params`].
    fn add_scaled(&mut self, g: &[f64], step: f64) {
        let theta: Vec<f64> = self.params().iter().zip(g).map(|(t, d)| t + step * d).collect();
        self.set_params(&theta).expect("gradient has the parameter layout");
    }
}

pub fn reward_of_model(model: &RewardModel, spec: &RegularizerSpec, s: usize, a: usize) -> Result<f64> {
    model.check_index(s, a)?;
    Ok(model.reward_row(spec, s)?[a])
}

/// `r(s,a) − t(s,a;π)`; the discriminator is its logistic.
pub fn discriminator_logit(
    model: &RewardModel,
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
    s: usize,
    a: usize,
) -> Result<f64> {
    if s >= policy.n_states() {
        return Err(Error::Index(format!("state {s} outside the policy")));
    }
    let t = crate::irl::irl_reward_row(policy.row(s), spec)?;
    Ok(reward_of_model(model, spec, s, a)? - t[a])
}

/// `log σ(z)`, stable for large `|z|`.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Minibatch objective `mean_demo log D + mean_rollout log(1 − D)` and its
/// gradient in the [`RewardModel::params`] layout.
pub(crate) fn objective_and_gradient(
    model: &RewardModel,
    demos: &[(usize, usize)],
    rollouts: &[(usize, usize)],
    t: &RewardTable,
    spec: &RegularizerSpec,
) -> Result<(f64, Vec<f64>)> {
    if demos.is_empty() || rollouts.is_empty() {
        return Err(Error::Parameter("discriminator batches must be non-empty".into()));
    }
    let n_a = model.n_actions();
    let n_s = model.n_states();
    let mut grad = vec![0.0; model.params().len()];
    let mut objective = 0.0;
    // row cache: (probabilities, rewards) per state touched
    let mut rows: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; n_s];
    let batches = [(demos, true), (rollouts, false)];
    for (batch, is_demo) in batches {
        let scale = 1.0 / batch.len() as f64;
        for &(s, a) in batch {
            model.check_index(s, a)?;
            if rows[s].is_none() {
                rows[s] = Some(match model {
                    RewardModel::Nsm { table } => (Vec::new(), table[s].clone()),
                    RewardModel::Dbm { logits, baseline } => {
                        let (p, r) = neg_grad_row(&logits[s], spec);
                        (p, r.iter().map(|x| x + baseline[s]).collect())
                    }
                });
            }
            let (p, r) = rows[s].as_ref().unwrap();
            let z = r[a] - t.get(s, a);
            let w = if is_demo {
                objective += scale * log_sigmoid(z);
                scale * (1.0 - sigmoid(z))
            } else {
                objective += scale * log_sigmoid(-z);
                -scale * sigmoid(z)
            };
            match model {
                RewardModel::Nsm { .. } => grad[s * n_a + a] += w,
                RewardModel::Dbm { .. } => {
                    let c = chain_coeff(p[a], spec);
                    for b in 0..n_a {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        grad[s * n_a + b] += w * c * (delta - p[b]);
                    }
                    grad[n_s * n_a + s] += w;
                }
            }
        }
    }
    Ok((objective, grad))
}

/// Minibatch discriminator objective under the current policy.
pub fn discriminator_objective(
    model: &RewardModel,
    demos: &[(usize, usize)],
    rollouts: &[(usize, usize)],
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
) -> Result<f64> {
    let t = exact_irl_reward(policy, spec)?;
    Ok(objective_and_gradient(model, demos, rollouts, &t, spec)?.0)
}

/// Analytic gradient of [`discriminator_objective`] in the
/// [`RewardModel::params`] layout.
pub fn discriminator_gradient(
    model: &RewardModel,
    demos: &[(usize, usize)],
    rollouts: &[(usize, usize)],
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
) -> Result<Vec<f64>> {
    let t = exact_irl_reward(policy, spec)?;
    Ok(objective_and_gradient(model, demos, rollouts, &t, spec)?.1)
}

/// One gradient-ascent step on the discriminator objective. Returns the
/// objective before the step.
pub fn discriminator_step(
    model: &mut RewardModel,
    demos: &[(usize, usize)],
    rollouts: &[(usize, usize)],
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
    lr: f64,
) -> Result<f64> {
    let t = exact_irl_reward(policy, spec)?;
    step_with_target(model, demos, rollouts, &t, spec, lr)
}

pub(crate) fn step_with_target(
    model: &mut RewardModel,
    demos: &[(usize, usize)],
    rollouts: &[(usize, usize)],
    t: &RewardTable,
    spec: &RegularizerSpec,
    lr: f64,
) -> Result<f64> {
    let (obj, grad) = objective_and_gradient(model, demos, rollouts, t, spec)?;
    model.add_scaled(&grad, lr);
    Ok(obj)
}
