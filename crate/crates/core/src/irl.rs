//! Closed-form rewards for regularized inverse RL, potential-based shaping,
//! the advantage-style reward built from `Q_E = ∇Ω(π_E)`, and the
//! visitation-space regularizer whose gradient reproduces the IRL reward.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, TabularPolicy};
use crate::regularizer::{check_distribution, Family, RegularizerSpec};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Dense `[s][a]` reward table with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RewardTable {
    r: Vec<Vec<f64>>,
}

impl RewardTable {
    pub fn new(r: Vec<Vec<f64>>) -> Result<Self> {
        let n_a = r.first().map_or(0, Vec::len);
        if r.is_empty() || n_a == 0 {
            return Err(Error::Parameter("reward table must be non-empty".into()));
        }
        for (s, row) in r.iter().enumerate() {
            if row.len() != n_a {
                return Err(Error::Parameter(format!(
                    "reward row {s} has {} entries, expected {n_a}",
                    row.len()
                )));
            }
            if let Some(a) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!("reward ({s}, {a}) is not finite")));
            }
        }
        Ok(RewardTable { r })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        RewardTable {
            r: vec![vec![0.0; n_actions]; n_states],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.r[s][a]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.r
    }

    pub fn n_states(&self) -> usize {
        self.r.len()
    }

    pub fn n_actions(&self) -> usize {
        self.r[0].len()
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.r
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &RewardTable) -> f64 {
        self.r
            .iter()
            .flatten()
            .zip(other.r.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Copy with each state's row shifted to mean zero.
    pub fn mean_centered(&self) -> RewardTable {
        let r = self
            .r
            .iter()
            .map(|row| {
                let m = row.iter().sum::<f64>() / row.len() as f64;
                row.iter().map(|x| x - m).collect()
            })
            .collect();
        RewardTable { r }
    }

    /// CSV with header `s,a,r`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "s,a,r")?;
        for (s, row) in self.r.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                writeln!(w, "{s},{a},{v}")?;
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for RewardTable {
    type Error = Error;
    fn try_from(r: Vec<Vec<f64>>) -> Result<Self> {
        RewardTable::new(r)
    }
}

impl From<RewardTable> for Vec<Vec<f64>> {
    fn from(t: RewardTable) -> Self {
        t.r
    }
}

/// State potential `Φ` for shaping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFunction {
    pub phi_s: Vec<f64>,
}

impl PotentialFunction {
    pub fn new(phi_s: Vec<f64>) -> Result<Self> {
        if let Some(s) = phi_s.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!("potential at state {s} is not finite")));
        }
        Ok(PotentialFunction { phi_s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingMode {
    /// `r + γΦ(s') − Φ(s)` with `s'` sampled at rollout time; tabulated as
    /// its expectation.
    NextStateSample,
    /// `r + γ E[Φ(s')] − Φ(s)`.
    NextStateExpectation,
}

/// `E_{a~p}[f_φ'(p(a)) − φ(p(a))]`, without the `λ` factor.
pub fn reward_baseline(row: &[f64], spec: &RegularizerSpec) -> Result<f64> {
    check_distribution(row)?;
    if matches!(spec.family(), Family::Shannon) {
        return Ok(-1.0);
    }
    // zero entries contribute nothing: f_φ'(0+) and φ(0) are finite here
    let mut acc = 0.0;
    for &p in row.iter().filter(|p| **p > 0.0) {
        acc += p * spec.f_prime_raw(p) - spec.f_phi(p);
    }
    Ok(acc)
}

/// IRL reward for one state: `−λ f_φ'(p(a)) + λ · baseline(p)`.
pub fn irl_reward_row(row: &[f64], spec: &RegularizerSpec) -> Result<Vec<f64>> {
    let baseline = reward_baseline(row, spec)?;
    let lambda = spec.lambda();
    row.iter()
        .map(|&p| spec.f_phi_prime_closed(p).map(|d| lambda * (baseline - d)))
        .collect()
}

/// The reward under which `policy` is the unique regularized-optimal policy.
pub fn exact_irl_reward(policy: &TabularPolicy, spec: &RegularizerSpec) -> Result<RewardTable> {
    let r = policy
        .rows()
        .iter()
        .enumerate()
        .map(|(s, row)| {
            irl_reward_row(row, spec).map_err(|e| match e {
                Error::Domain(msg) => {
                    let a = row.iter().position(|p| *p == 0.0).unwrap_or(0);
                    Error::Domain(format!("state {s}, action {a}: {msg}"))
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RewardTable::new(r)
}

/// Potential-based shaping. Both modes tabulate to the same expectation.
pub fn shape_reward(
    reward: &RewardTable,
    potential: &PotentialFunction,
    mdp: &TabularMdp,
    mode: ShapingMode,
) -> Result<RewardTable> {
    if reward.n_states() != mdp.n_states() || reward.n_actions() != mdp.n_actions() {
        return Err(Error::Parameter("reward shape does not match the MDP".into()));
    }
    if potential.phi_s.len() != mdp.n_states() {
        return Err(Error::Parameter("potential length does not match the MDP".into()));
    }
    match mode {
        ShapingMode::NextStateSample | ShapingMode::NextStateExpectation => {}
    }
    let gamma = mdp.gamma();
    let r = reward
        .rows()
        .iter()
        .enumerate()
        .map(|(s, row)| {
            row.iter()
                .enumerate()
                .map(|(a, r)| r + gamma * mdp.expected_next(s, a, &potential.phi_s) - potential.phi_s[s])
                .collect()
        })
        .collect();
    RewardTable::new(r)
}

/// Output of [`geist_reward`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeistReward {
    /// `Q_E(s,a) − γ E[Ω*(Q_E(s',·))]`.
    pub rho: RewardTable,
    /// `Q_E(s,a) − Ω*(Q_E(s,·))`.
    pub r_tilde: RewardTable,
    /// `Ω*(Q_E(s,·))`, the potential linking the two.
    pub conjugate: PotentialFunction,
}

/// Rewards built from the choice `Q_E(s,·) = ∇Ω(π_E(·|s))`.
pub fn geist_reward(policy: &TabularPolicy, mdp: &TabularMdp, spec: &RegularizerSpec) -> Result<GeistReward> {
    policy.check_against(mdp)?;
    let mut q_e = Vec::with_capacity(policy.n_states());
    let mut conj = Vec::with_capacity(policy.n_states());
    for (s, row) in policy.rows().iter().enumerate() {
        if let Some(a) = row.iter().position(|p| *p <= 0.0) {
            return Err(Error::Domain(format!(
                "state {s}, action {a}: expert must be strictly interior"
            )));
        }
        let q = spec.grad_omega(row)?;
        let inner: f64 = row.iter().zip(&q).map(|(p, x)| p * x).sum();
        conj.push(inner - spec.omega(row)?);
        q_e.push(q);
    }
    let gamma = mdp.gamma();
    let rho = q_e
        .iter()
        .enumerate()
        .map(|(s, q)| {
            q.iter()
                .enumerate()
                .map(|(a, x)| x - gamma * mdp.expected_next(s, a, &conj))
                .collect()
        })
        .collect();
    let r_tilde = q_e
        .iter()
        .zip(&conj)
        .map(|(q, c)| q.iter().map(|x| x - c).collect())
        .collect();
    Ok(GeistReward {
        rho: RewardTable::new(rho)?,
        r_tilde: RewardTable::new(r_tilde)?,
        conjugate: PotentialFunction::new(conj)?,
    })
}

/// `Σ_s Σ_a d(s,a) Ω(d(s,·)/Σ_a' d(s,a'))` over an unnormalized,
/// non-negative table; zero-mass states contribute nothing.
pub fn visitation_regularizer(d: &[Vec<f64>], spec: &RegularizerSpec) -> Result<f64> {
    let mut total = 0.0;
    for (s, row) in d.iter().enumerate() {
        if let Some(a) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidDistribution(format!("d({s}, {a}) = {}", row[a])));
        }
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let cond: Vec<f64> = row.iter().map(|x| x / mass).collect();
        total += mass * spec.omega_raw(&cond);
    }
    Ok(total)
}

/// Central finite-difference gradient of [`visitation_regularizer`], each
/// `d(s,a)` perturbed as a free coordinate.
pub fn visitation_gradient_fd(d: &[Vec<f64>], spec: &RegularizerSpec, h: f64) -> Result<Vec<Vec<f64>>> {
    let min_entry = d.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !(h > 0.0) || h >= min_entry {
        return Err(Error::StepSize { h, min_entry });
    }
    let mut work: Vec<Vec<f64>> = d.to_vec();
    let mut grad = vec![vec![0.0; d.first().map_or(0, Vec::len)]; d.len()];
    for s in 0..d.len() {
        for a in 0..d[s].len() {
            let orig = work[s][a];
            work[s][a] = orig + h;
            let up = visitation_regularizer(&work, spec)?;
            work[s][a] = orig - h;
            let down = visitation_regularizer(&work, spec)?;
            work[s][a] = orig;
            grad[s][a] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}
