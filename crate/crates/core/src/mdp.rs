//! Tabular MDPs, discounted visitation distributions and the regularized
//! Bellman machinery: policy evaluation, the per-state optimal policy with
//! its normalizer `μ`, and regularized value iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularizer::{check_distribution, Family, RegularizerSpec};

/// Default sup-norm stopping tolerance for the fixed-point iterations.
pub const DEFAULT_TOL: f64 = 1e-10;

const MU_TOL: f64 = 1e-12;
const MU_MAX_ITER: usize = 200;
const RENORM_TOL: f64 = 1e-10;
const CONJUGACY_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 1_000_000;

/// A finite discounted MDP. Transition rows are dense `[s][a][s']`; a sparse
/// successor list is cached alongside for the Bellman backups.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MdpDoc", into = "MdpDoc")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    p0: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    gamma: f64,
    reward: Option<Vec<Vec<f64>>>,
    successors: Vec<Vec<Vec<(usize, f64)>>>,
}

impl TabularMdp {
    pub fn new(
        p0: Vec<f64>,
        transition: Vec<Vec<Vec<f64>>>,
        gamma: f64,
        reward: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::InvalidMdp("no actions".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if p0.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "p0 has {} entries for {n_states} states",
                p0.len()
            )));
        }
        check_distribution(&p0).map_err(|e| Error::InvalidMdp(format!("p0: {e}")))?;
        for (s, row) in transition.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::InvalidMdp(format!(
                    "state {s} has {} actions, expected {n_actions}",
                    row.len()
                )));
            }
            for (a, next) in row.iter().enumerate() {
                if next.len() != n_states {
                    return Err(Error::InvalidMdp(format!(
                        "transition (s={s}, a={a}) has {} entries, expected {n_states}",
                        next.len()
                    )));
                }
                check_distribution(next).map_err(|e| Error::InvalidMdp(format!("transition (s={s}, a={a}): {e}")))?;
            }
        }
        if let Some(r) = &reward {
            check_reward_shape(r, n_states, n_actions)?;
        }
        let successors = transition
            .iter()
            .map(|row| {
                row.iter()
                    .map(|next| {
                        next.iter()
                            .enumerate()
                            .filter(|(_, &p)| p > 0.0)
                            .map(|(s2, &p)| (s2, p))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(TabularMdp {
            n_states,
            n_actions,
            p0,
            transition,
            gamma,
            reward,
            successors,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn transition(&self) -> &[Vec<Vec<f64>>] {
        &self.transition
    }

    pub fn reward(&self) -> Option<&[Vec<f64>]> {
        self.reward.as_deref()
    }

    pub fn require_reward(&self) -> Result<&[Vec<f64>]> {
        self.reward().ok_or(Error::MissingReward)
    }

    /// Non-zero entries of `P(·|s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s][a]
    }

    pub fn with_reward(&self, reward: Vec<Vec<f64>>) -> Result<Self> {
        check_reward_shape(&reward, self.n_states, self.n_actions)?;
        let mut out = self.clone();
        out.reward = Some(reward);
        Ok(out)
    }

    pub fn without_reward(&self) -> Self {
        let mut out = self.clone();
        out.reward = None;
        out
    }

    /// `E_{s'~P(·|s,a)} v(s')`.
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.successors[s][a].iter().map(|&(s2, p)| p * v[s2]).sum()
    }

    /// `Q(s, a) = r(s, a) + γ E_{s'} v(s')`.
    pub fn q_from_v(&self, reward: &[Vec<f64>], v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| reward[s][a] + self.gamma * self.expected_next(s, a, v))
                    .collect()
            })
            .collect()
    }
}

fn check_reward_shape(r: &[Vec<f64>], n_states: usize, n_actions: usize) -> Result<()> {
    if r.len() != n_states {
        return Err(Error::InvalidMdp(format!(
            "reward has {} rows for {n_states} states",
            r.len()
        )));
    }
    for (s, row) in r.iter().enumerate() {
        if row.len() != n_actions {
            return Err(Error::InvalidMdp(format!(
                "reward row {s} has {} entries, expected {n_actions}",
                row.len()
            )));
        }
        if let Some(a) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidMdp(format!("reward (s={s}, a={a}) is not finite")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDoc {
    n_states: usize,
    n_actions: usize,
    p0: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward: Option<Vec<Vec<f64>>>,
}

impl TryFrom<MdpDoc> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDoc) -> Result<Self> {
        let mdp = TabularMdp::new(doc.p0, doc.transition, doc.gamma, doc.reward)?;
        if mdp.n_states != doc.n_states || mdp.n_actions != doc.n_actions {
            return Err(Error::InvalidMdp(format!(
                "declared shape {}x{} does not match arrays {}x{}",
                doc.n_states, doc.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(mdp)
    }
}

impl From<TabularMdp> for MdpDoc {
    fn from(mdp: TabularMdp) -> Self {
        MdpDoc {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            p0: mdp.p0,
            transition: mdp.transition,
            gamma: mdp.gamma,
            reward: mdp.reward,
        }
    }
}

/// Row-stochastic state → action table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TabularPolicy {
    probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPolicy("no states".into()));
        }
        let n_actions = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::InvalidPolicy(format!(
                    "row {s} has {} actions, expected {n_actions}",
                    row.len()
                )));
            }
            check_distribution(row).map_err(|e| Error::InvalidPolicy(format!("row {s}: {e}")))?;
        }
        Ok(TabularPolicy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularPolicy {
            probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.probs
    }

    pub fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(Error::InvalidPolicy(format!(
                "policy shape {}x{} does not match MDP {}x{}",
                self.n_states(),
                self.n_actions(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    /// Largest per-state total variation distance to `other`.
    pub fn max_tv(&self, other: &TabularPolicy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| total_variation(p, q))
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for TabularPolicy {
    type Error = Error;

    fn try_from(probs: Vec<Vec<f64>>) -> Result<Self> {
        TabularPolicy::new(probs)
    }
}

impl From<TabularPolicy> for Vec<Vec<f64>> {
    fn from(p: TabularPolicy) -> Self {
        p.probs
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalized discounted state-action occupancy `d(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationDistribution {
    d: Vec<Vec<f64>>,
}

impl VisitationDistribution {
    /// Wraps a non-negative table, normalizing it to unit mass.
    pub fn new(mut d: Vec<Vec<f64>>) -> Result<Self> {
        if d.is_empty() || d[0].is_empty() {
            return Err(Error::InvalidDistribution("empty visitation table".into()));
        }
        let width = d[0].len();
        let mut total = 0.0;
        for (s, row) in d.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidDistribution(format!("ragged row {s}")));
            }
            for (a, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidDistribution(format!("d(s={s}, a={a}) = {x}")));
                }
                total += x;
            }
        }
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        d.iter_mut().flatten().for_each(|x| *x /= total);
        Ok(VisitationDistribution { d })
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.d[s][a]
    }

    pub fn n_states(&self) -> usize {
        self.d.len()
    }

    pub fn n_actions(&self) -> usize {
        self.d[0].len()
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        self.d.iter().map(|row| row.iter().sum()).collect()
    }

    /// `π̄_d(a|s) = d(s, a) / Σ_a' d(s, a')`; zero-mass states get a uniform row.
    pub fn conditional_policy(&self) -> TabularPolicy {
        let n_a = self.n_actions();
        let probs = self
            .d
            .iter()
            .map(|row| {
                let m: f64 = row.iter().sum();
                if m > 0.0 {
                    row.iter().map(|x| x / m).collect()
                } else {
                    vec![1.0 / n_a as f64; n_a]
                }
            })
            .collect();
        TabularPolicy { probs }
    }
}

/// Optimal regularized values, policy and per-state normalizers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueSolution {
    pub q_values: Vec<Vec<f64>>,
    pub v_values: Vec<f64>,
    pub policy: TabularPolicy,
    pub mu: Vec<f64>,
    pub sweeps: usize,
}

/// State distribution `x = (1-γ) P0 + γ P_π^T x` by dense LU, then
/// `d(s, a) = π(a|s) x(s)`.
pub fn visitation(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<VisitationDistribution> {
    policy.check_against(mdp)?;
    let n = mdp.n_states();
    let g = mdp.gamma();
    let mut a = DMatrix::<f64>::identity(n, n);
    for s in 0..n {
        for (act, &pi) in policy.row(s).iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for &(s2, p) in mdp.successors(s, act) {
                a[(s2, s)] -= g * pi * p;
            }
        }
    }
    let b = DVector::from_iterator(n, mdp.p0().iter().map(|p| (1.0 - g) * p));
    let x = a.lu().solve(&b).ok_or(Error::Singular("visitation"))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("visitation"));
    }
    let d = (0..n)
        .map(|s| {
            let xs = x[s].max(0.0);
            policy.row(s).iter().map(|pi| pi * xs).collect()
        })
        .collect();
    VisitationDistribution::new(d)
}

/// Fixed point of the regularized evaluation operator
/// `[T^π V](s) = ⟨π(·|s), r(s,·) + γPV⟩ − Ω(π(·|s))`. Returns `(V, Q)`.
pub fn regularized_policy_evaluation(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let reward = mdp.require_reward()?;
    policy_evaluation_with_reward(mdp, reward, policy, spec, tol)
}

pub fn policy_evaluation_with_reward(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    policy.check_against(mdp)?;
    let n = mdp.n_states();
    let omegas: Vec<f64> = (0..n).map(|s| spec.omega_raw(policy.row(s))).collect();
    let mut v = vec![0.0; n];
    for _ in 0..MAX_SWEEPS {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                let ev: f64 = policy
                    .row(s)
                    .iter()
                    .enumerate()
                    .map(|(a, pi)| pi * (reward[s][a] + mdp.gamma() * mdp.expected_next(s, a, &v)))
                    .sum();
                ev - omegas[s]
            })
            .collect();
        let delta = sup_diff(&next, &v);
        v = next;
        if delta <= tol {
            let q = mdp.q_from_v(reward, &v);
            return Ok((v, q));
        }
    }
    Err(Error::NonConvergence {
        what: "regularized policy evaluation",
        iterations: MAX_SWEEPS,
    })
}

/// Maximizer of `⟨p, q⟩ − Ω(p)` over the simplex and its normalizer `μ`.
///
/// `p(a) = max{g_φ((μ − q(a))/λ), 0}` with `μ` chosen so that `p` sums to
/// one. Since `g_φ` is decreasing, larger `q(a)` gives larger `p(a)`. `μ` is
/// bracketed by `[max q + λ f_φ'(1), max q + λ f_φ'(1/|A|)]`, over which the
/// total mass falls monotonically through one.
pub fn optimal_state_policy(q_row: &[f64], spec: &RegularizerSpec) -> Result<(Vec<f64>, f64)> {
    if q_row.is_empty() {
        return Err(Error::Domain("empty action-value row".into()));
    }
    if let Some(a) = q_row.iter().position(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("action value {a} is not finite")));
    }
    let lambda = spec.lambda();
    let n = q_row.len();
    if n == 1 {
        return Ok((vec![1.0], q_row[0] + lambda * spec.f_prime_raw(1.0)));
    }
    let q_max = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    if let Family::Shannon = spec.family() {
        let w: Vec<f64> = q_row.iter().map(|q| ((q - q_max) / lambda).exp()).collect();
        let z: f64 = w.iter().sum();
        let p = w.iter().map(|x| x / z).collect();
        let mu = q_max + lambda * (z.ln() - 1.0);
        return Ok((p, mu));
    }

    if let Family::Tsallis { k, q } = spec.family() {
        if q == 2.0 {
            return Ok(tsallis2_policy(q_row, lambda * k));
        }
    }
    normalizer_search(q_row, spec)
}

/// `max_p ⟨p, q⟩ − Ω(p)` without materializing `p` where a closed form
/// allows; the inner loop of value iteration.
fn optimal_state_value(q_row: &[f64], spec: &RegularizerSpec) -> Result<f64> {
    const STACK: usize = 32;
    let n = q_row.len();
    let lambda = spec.lambda();
    if n > 1 && n <= STACK && q_row.iter().all(|x| x.is_finite()) {
        match spec.family() {
            Family::Shannon => {
                let q_max = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = q_row.iter().map(|q| ((q - q_max) / lambda).exp()).sum();
                return Ok(q_max + lambda * z.ln());
            }
            Family::Tsallis { k, q: 2.0 } => {
                let c = lambda * k;
                let mut sorted = [0.0; STACK];
                sorted[..n].copy_from_slice(q_row);
                sorted[..n].sort_unstable_by(|a, b| b.total_cmp(a));
                let mu = tsallis2_threshold(&sorted[..n], c);
                let mut mass = 0.0;
                let mut sq = 0.0;
                for &x in q_row {
                    let p = ((x - mu + c) / (2.0 * c)).max(0.0);
                    mass += p;
                    sq += p * p;
                }
                return Ok(mu + c * sq / (mass * mass));
            }
            _ => {}
        }
    }
    let (p, mu) = optimal_state_policy(q_row, spec)?;
    Ok(state_value_from_normalizer(&p, mu, spec))
}

/// Safeguarded Newton search for `μ` on the bracket.
fn normalizer_search(q_row: &[f64], spec: &RegularizerSpec) -> Result<(Vec<f64>, f64)> {
    let lambda = spec.lambda();
    let n = q_row.len();
    let q_max = q_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |mu: f64| -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut slope = 0.0;
        for &q in q_row {
            let p = spec.g_phi((mu - q) / lambda)?;
            total += p;
            if p > 0.0 && p < 1.0 {
                slope += 1.0 / (lambda * spec.f_second_raw(p));
            }
        }
        Ok((total, slope))
    };

    let mut lo = q_max + lambda * spec.f_prime_raw(1.0);
    let mut hi = q_max + lambda * spec.f_prime_raw(1.0 / n as f64);
    let (m_lo, _) = mass(lo)?;
    let (m_hi, _) = mass(hi)?;
    if m_lo < 1.0 - RENORM_TOL || m_hi > 1.0 + RENORM_TOL {
        return Err(Error::Bracket(format!("mass {m_lo} at lower end, {m_hi} at upper end")));
    }
    let mut mu = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..MU_MAX_ITER {
        let (m, slope) = mass(mu)?;
        let resid = m - 1.0;
        if resid.abs() <= 1e-14 {
            converged = true;
            break;
        }
        // total mass decreases in μ
        if resid > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= MU_TOL {
            mu = 0.5 * (lo + hi);
            converged = true;
            break;
        }
        let newton = if slope < 0.0 { mu - resid / slope } else { f64::NAN };
        mu = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "normalizer search",
            iterations: MU_MAX_ITER,
        });
    }
    let mut p: Vec<f64> = q_row
        .iter()
        .map(|&q| spec.g_phi((mu - q) / lambda))
        .collect::<Result<_>>()?;
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > RENORM_TOL {
        return Err(Error::Bracket(format!("policy mass {total} after search")));
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok((p, mu))
}

/// Tsallis `q = 2`: `p(a) = max{0, (q(a) − μ + c) / (2c)}` with `c = λk`,
/// an exact sort-and-threshold projection.
fn tsallis2_policy(q_row: &[f64], c: f64) -> (Vec<f64>, f64) {
    let mut sorted = q_row.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mu = tsallis2_threshold(&sorted, c);
    let p: Vec<f64> = q_row.iter().map(|q| ((q - mu + c) / (2.0 * c)).max(0.0)).collect();
    let total: f64 = p.iter().sum();
    (p.iter().map(|x| x / total).collect(), mu)
}

/// Normalizer for `q = 2` given the action values in descending order.
fn tsallis2_threshold(sorted: &[f64], c: f64) -> f64 {
    let mut cum = 0.0;
    let mut mu = 0.0;
    for (i, &q) in sorted.iter().enumerate() {
        cum += q;
        let m = i as f64 + 1.0;
        let candidate = (cum + m * c - 2.0 * c) / m;
        if q + c - candidate > 0.0 {
            mu = candidate;
        } else {
            break;
        }
    }
    mu
}

/// `V(s) = μ − λ Σ_a p(a)² φ'(p(a))`.
pub fn state_value_from_normalizer(p: &[f64], mu: f64, spec: &RegularizerSpec) -> f64 {
    mu - spec.lambda() * p.iter().map(|&x| spec.x_sq_phi_prime(x)).sum::<f64>()
}

/// `⟨p, q⟩ − Ω(p)`.
pub fn state_value_direct(p: &[f64], q_row: &[f64], spec: &RegularizerSpec) -> f64 {
    let ev: f64 = p.iter().zip(q_row).map(|(a, b)| a * b).sum();
    ev - spec.omega_raw(p)
}

struct Backup {
    p: Vec<f64>,
    mu: f64,
    v: f64,
}

fn backup(state: usize, q_row: &[f64], spec: &RegularizerSpec) -> Result<Backup> {
    let (p, mu) = optimal_state_policy(q_row, spec)?;
    let v = state_value_from_normalizer(&p, mu, spec);
    let direct = state_value_direct(&p, q_row, spec);
    if (v - direct).abs() > CONJUGACY_TOL * v.abs().max(1.0) {
        return Err(Error::Conjugacy {
            state,
            closed_form: v,
            direct,
        });
    }
    Ok(Backup { p, mu, v })
}

/// Regularized value iteration on the MDP's own reward.
pub fn regularized_value_iteration(mdp: &TabularMdp, spec: &RegularizerSpec, tol: f64) -> Result<ValueSolution> {
    let reward = mdp.require_reward()?;
    value_iteration_with_reward(mdp, reward, spec, tol, None)
}

/// Regularized value iteration from an explicit reward table and optional
/// initial values.
pub fn value_iteration_with_reward(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    spec: &RegularizerSpec,
    tol: f64,
    init: Option<&[f64]>,
) -> Result<ValueSolution> {
    let mut v = initial_values(mdp, reward, init)?;
    let mut next = vec![0.0; mdp.n_states()];
    let mut row = vec![0.0; mdp.n_actions()];
    for sweep in 1..=MAX_SWEEPS {
        for (s, out) in next.iter_mut().enumerate() {
            *out = state_backup(mdp, reward, spec, s, &v, &mut row)?;
        }
        let delta = sup_diff(&next, &v);
        std::mem::swap(&mut v, &mut next);
        if delta <= tol {
            return finish(mdp, reward, spec, &v, sweep);
        }
    }
    Err(Error::NonConvergence {
        what: "regularized value iteration",
        iterations: MAX_SWEEPS,
    })
}

/// Same fixed point as [`value_iteration_with_reward`], reached with
/// in-place (Gauss-Seidel) sweeps that alternate between ascending and
/// descending state order. Far fewer sweeps when values flow along the
/// state ordering, as on the grid.
pub fn value_iteration_in_place(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    spec: &RegularizerSpec,
    tol: f64,
    init: Option<&[f64]>,
) -> Result<ValueSolution> {
    let n = mdp.n_states();
    let mut v = initial_values(mdp, reward, init)?;
    let mut row = vec![0.0; mdp.n_actions()];
    for sweep in 1..=MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let s = if sweep % 2 == 1 { i } else { n - 1 - i };
            let new = local_backup(mdp, reward, spec, s, &v, &mut row)?;
            delta = delta.max((new - v[s]).abs());
            v[s] = new;
        }
        if delta <= tol {
            return finish(mdp, reward, spec, &v, sweep);
        }
    }
    Err(Error::NonConvergence {
        what: "regularized value iteration",
        iterations: MAX_SWEEPS,
    })
}

fn initial_values(mdp: &TabularMdp, reward: &[Vec<f64>], init: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = mdp.n_states();
    if reward.len() != n || reward.iter().any(|r| r.len() != mdp.n_actions()) {
        return Err(Error::InvalidMdp("reward shape does not match MDP".into()));
    }
    match init {
        Some(v0) if v0.len() == n => Ok(v0.to_vec()),
        Some(v0) => Err(Error::InvalidMdp(format!(
            "initial values have {} entries for {n} states",
            v0.len()
        ))),
        None => Ok(vec![0.0; n]),
    }
}

fn state_backup(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    spec: &RegularizerSpec,
    s: usize,
    v: &[f64],
    row: &mut [f64],
) -> Result<f64> {
    for (a, q) in row.iter_mut().enumerate() {
        *q = reward[s][a] + mdp.gamma * mdp.expected_next(s, a, v);
    }
    optimal_state_value(row, spec)
}

/// Backup that solves the state's own equation exactly when every action
/// returns to `s` with the same probability `ρ`: then `Q = base + γρV(s)`
/// and the shift rule for the conjugate gives `V(s) = Ω*(base) / (1 − γρ)`.
/// Absorbing states converge in one sweep instead of `log tol / log γ`.
fn local_backup(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    spec: &RegularizerSpec,
    s: usize,
    v: &[f64],
    row: &mut [f64],
) -> Result<f64> {
    let mut rho = None;
    for a in 0..mdp.n_actions {
        let own: f64 = mdp.successors[s][a].iter().filter(|e| e.0 == s).map(|e| e.1).sum();
        match rho {
            None => rho = Some(own),
            Some(r) if r == own => {}
            Some(_) => return state_backup(mdp, reward, spec, s, v, row),
        }
    }
    let rho = rho.unwrap_or(0.0);
    for (a, q) in row.iter_mut().enumerate() {
        let rest: f64 = mdp.successors[s][a]
            .iter()
            .filter(|e| e.0 != s)
            .map(|&(s2, p)| p * v[s2])
            .sum();
        *q = reward[s][a] + mdp.gamma * rest;
    }
    Ok(optimal_state_value(row, spec)? / (1.0 - mdp.gamma * rho))
}

/// Final greedy backup with the conjugacy check on every state.
fn finish(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    spec: &RegularizerSpec,
    v: &[f64],
    sweeps: usize,
) -> Result<ValueSolution> {
    let q = mdp.q_from_v(reward, v);
    let n = q.len();
    let mut probs = Vec::with_capacity(n);
    let mut mus = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for (s, row) in q.iter().enumerate() {
        let b = backup(s, row, spec)?;
        probs.push(b.p);
        mus.push(b.mu);
        values.push(b.v);
    }
    Ok(ValueSolution {
        q_values: q,
        v_values: values,
        policy: TabularPolicy { probs },
        mu: mus,
        sweeps,
    })
}

/// Exact `J_Ω(r, π) = (1/(1−γ)) E_{d_π}[r(s,a) − Ω(π(·|s))]`.
pub fn return_value(mdp: &TabularMdp, policy: &TabularPolicy, spec: &RegularizerSpec) -> Result<f64> {
    let reward = mdp.require_reward()?;
    return_with_reward(mdp, reward, policy, spec)
}

pub fn return_with_reward(
    mdp: &TabularMdp,
    reward: &[Vec<f64>],
    policy: &TabularPolicy,
    spec: &RegularizerSpec,
) -> Result<f64> {
    let d = visitation(mdp, policy)?;
    let mut total = 0.0;
    for (s, r_row) in reward.iter().enumerate() {
        let omega = spec.omega_raw(policy.row(s));
        for (a, r) in r_row.iter().enumerate() {
            total += d.get(s, a) * (r - omega);
        }
    }
    Ok(total / (1.0 - mdp.gamma()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
