//! Environment constructors and demonstration sampling.
//!
//! * the four-armed bandit with a dense or sparse expert;
//! * a lattice version of Bermuda World with its analytic expert;
//! * seeded random MDPs with an ergodicity floor.

use std::f64::consts::PI;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, TabularPolicy};

pub const BANDIT_GAMMA: f64 = 0.99;
pub const BANDIT_DENSE: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
pub const BANDIT_SPARSE: [f64; 4] = [0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0];

pub const BERMUDA_GAMMA: f64 = 0.95;
pub const BERMUDA_TARGETS: [(f64, f64); 3] = [(-5.0, 10.0), (0.0, 10.0), (5.0, 10.0)];
pub const BERMUDA_EPS: f64 = 1e-4;
/// Movement directions, in radians.
pub const BERMUDA_ANGLES: [f64; 8] = [
    -PI,
    -0.75 * PI,
    -0.5 * PI,
    -0.25 * PI,
    0.0,
    0.25 * PI,
    0.5 * PI,
    0.75 * PI,
];

/// Uniform mass mixed into every random transition row.
const ERGODICITY_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditKind {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpertSpec {
    BanditDense,
    BanditSparse,
    BermudaAnalytic,
    Explicit(TabularPolicy),
}

/// Single state with a self-loop, four actions, no reward.
pub fn bandit_env(kind: BanditKind) -> (TabularMdp, TabularPolicy) {
    let mdp = TabularMdp::new(vec![1.0], vec![vec![vec![1.0]; 4]], BANDIT_GAMMA, None).expect("bandit MDP is valid");
    let row = match kind {
        BanditKind::Dense => BANDIT_DENSE.to_vec(),
        BanditKind::Sparse => BANDIT_SPARSE.to_vec(),
    };
    let expert = TabularPolicy::new(vec![row]).expect("bandit expert is valid");
    (mdp, expert)
}

/// Lattice layout of Bermuda World: `nx × ny` points spanning
/// `x ∈ [-5, 5]`, `y ∈ [0, 10]`, state index `j * nx + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BermudaGeometry {
    pub nx: usize,
    pub ny: usize,
}

impl BermudaGeometry {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Parameter(format!(
                "bermuda grid needs at least 2x2 points, got {nx}x{ny}"
            )));
        }
        Ok(BermudaGeometry { nx, ny })
    }

    pub fn n_states(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        (s % self.nx, s / self.nx)
    }

    pub fn coords(&self, s: usize) -> (f64, f64) {
        let (i, j) = self.cell(s);
        (
            -5.0 + 10.0 * i as f64 / (self.nx - 1) as f64,
            10.0 * j as f64 / (self.ny - 1) as f64,
        )
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.cell(s).1 == self.ny - 1
    }

    /// Deterministic successor: one lattice step in the action's direction,
    /// rounded to the nearest point and clamped to the grid.
    pub fn step(&self, s: usize, a: usize) -> usize {
        if self.is_absorbing(s) {
            return s;
        }
        let (i, j) = self.cell(s);
        let theta = BERMUDA_ANGLES[a];
        let ni = snap(i as f64 + theta.cos(), self.nx);
        let nj = snap(j as f64 + theta.sin(), self.ny);
        self.index(ni, nj)
    }

    pub fn reflect_state(&self, s: usize) -> usize {
        let (i, j) = self.cell(s);
        self.index(self.nx - 1 - i, j)
    }

    pub fn reflect_action(a: usize) -> usize {
        project_angle(PI - BERMUDA_ANGLES[a])
    }

    /// Expert action distribution at point `(x, y)`: each target votes for the
    /// action nearest its bearing with weight `1 / (‖target − s‖⁴ + ε)`.
    pub fn expert_row(x: f64, y: f64) -> Vec<f64> {
        let mut row = vec![0.0; BERMUDA_ANGLES.len()];
        let mut total = 0.0;
        for &(tx, ty) in &BERMUDA_TARGETS {
            let dist2 = (tx - x).powi(2) + (ty - y).powi(2);
            let w = 1.0 / (dist2 * dist2 + BERMUDA_EPS);
            // on the target itself the bearing is undefined; point straight up
            let bearing = if dist2 < 1e-18 {
                0.5 * PI
            } else {
                (ty - y).atan2(tx - x)
            };
            row[project_angle(bearing)] += w;
            total += w;
        }
        row.iter_mut().for_each(|v| *v /= total);
        row
    }
}

// Nearest integer with ties toward the smaller index, clamped to [0, n-1].
fn snap(v: f64, n: usize) -> usize {
    let r = (v - 0.5).ceil();
    r.clamp(0.0, (n - 1) as f64) as usize
}

/// Index of the action angle closest to `theta` on the circle; ties go to
/// the smaller index.
pub fn project_angle(theta: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &ang) in BERMUDA_ANGLES.iter().enumerate() {
        let mut d = (theta - ang).rem_euclid(2.0 * PI);
        if d > PI {
            d = 2.0 * PI - d;
        }
        if d < best_d - 1e-12 {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Bermuda World on an `nx × ny` lattice with the analytic expert.
/// Top-row points are absorbing; episodes start uniformly on the bottom row.
pub fn bermuda_grid(nx: usize, ny: usize) -> Result<(TabularMdp, TabularPolicy)> {
    let geo = BermudaGeometry::new(nx, ny)?;
    let n = geo.n_states();
    let n_a = BERMUDA_ANGLES.len();
    let mut p0 = vec![0.0; n];
    for i in 0..nx {
        p0[geo.index(i, 0)] = 1.0 / nx as f64;
    }
    let transition = (0..n)
        .map(|s| {
            (0..n_a)
                .map(|a| {
                    let mut row = vec![0.0; n];
                    row[geo.step(s, a)] = 1.0;
                    row
                })
                .collect()
        })
        .collect();
    let mdp = TabularMdp::new(p0, transition, BERMUDA_GAMMA, None)?;
    let expert = (0..n)
        .map(|s| {
            let (x, y) = geo.coords(s);
            BermudaGeometry::expert_row(x, y)
        })
        .collect();
    Ok((mdp, TabularPolicy::new(expert)?))
}

/// Seeded random MDP. Each transition row puts random positive weight on a
/// random subset of `ceil(sparsity · |S|)` next states and then mixes in 1%
/// uniform mass, so every state is reachable from every state.
pub fn random_mdp(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    transition_sparsity: f64,
) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::Parameter(
            "random MDP needs at least one state and action".into(),
        ));
    }
    if !(transition_sparsity > 0.0 && transition_sparsity <= 1.0) {
        return Err(Error::Parameter(format!(
            "transition sparsity must lie in (0, 1], got {transition_sparsity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = ((transition_sparsity * n_states as f64).ceil() as usize).clamp(1, n_states);
    let uniform = 1.0 / n_states as f64;
    let transition = (0..n_states)
        .map(|_| {
            (0..n_actions)
                .map(|_| {
                    let mut row = vec![0.0; n_states];
                    for idx in sample_indices(&mut rng, n_states, support) {
                        row[idx] = rng.random_range(0.05..1.0);
                    }
                    let z: f64 = row.iter().sum();
                    row.iter()
                        .map(|w| (1.0 - ERGODICITY_FLOOR) * w / z + ERGODICITY_FLOOR * uniform)
                        .collect()
                })
                .collect()
        })
        .collect();
    let w: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.1..1.0)).collect();
    let z: f64 = w.iter().sum();
    let p0 = w.iter().map(|x| x / z).collect();
    TabularMdp::new(p0, transition, gamma, None)
}

/// Random policy with every entry at least `floor / |A|`-ish positive.
pub fn random_interior_policy(rng: &mut impl Rng, n_states: usize, n_actions: usize) -> TabularPolicy {
    let probs = (0..n_states)
        .map(|_| {
            let w: Vec<f64> = (0..n_actions).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        })
        .collect();
    TabularPolicy::new(probs).expect("normalized rows")
}

/// Expert state-action pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSet {
    pub pairs: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_policy: Option<TabularPolicy>,
}

impl DemoSet {
    pub fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if let Some(&(s, a)) = self
            .pairs
            .iter()
            .find(|(s, a)| *s >= mdp.n_states() || *a >= mdp.n_actions())
        {
            return Err(Error::Index(format!("demo pair ({s}, {a}) outside the MDP")));
        }
        Ok(())
    }

    /// Distinct demonstrated states in ascending order.
    pub fn visited_states(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last action with positive mass
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// Markov chain whose stationary state-action law is the discounted
/// visitation `d_π`: after each step the trajectory continues with
/// probability `γ` and restarts from `P0` otherwise.
#[derive(Debug, Clone)]
pub struct DiscountedSampler {
    state: usize,
}

/// One transition drawn by [`DiscountedSampler`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

impl DiscountedSampler {
    pub fn new(mdp: &TabularMdp, rng: &mut impl Rng) -> Self {
        DiscountedSampler {
            state: sample_categorical(rng, mdp.p0()),
        }
    }

    pub fn step(&mut self, mdp: &TabularMdp, policy: &TabularPolicy, rng: &mut impl Rng) -> Transition {
        let s = self.state;
        let a = sample_categorical(rng, policy.row(s));
        let next = sample_categorical(rng, &mdp.transition()[s][a]);
        self.state = if rng.random::<f64>() < mdp.gamma() {
            next
        } else {
            sample_categorical(rng, mdp.p0())
        };
        Transition {
            state: s,
            action: a,
            next_state: next,
        }
    }
}

/// `n_pairs` state-action pairs from `policy`, distributed as `d_π`.
pub fn sample_demos(mdp: &TabularMdp, policy: &TabularPolicy, n_pairs: usize, seed: u64) -> Result<DemoSet> {
    policy.check_against(mdp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = DiscountedSampler::new(mdp, &mut rng);
    let pairs = (0..n_pairs)
        .map(|_| {
            let t = sampler.step(mdp, policy, &mut rng);
            (t.state, t.action)
        })
        .collect();
    Ok(DemoSet {
        pairs,
        expert_policy: Some(policy.clone()),
    })
}

/// Environment addressed by name: `bandit:dense`, `bandit:sparse`,
/// `bermuda:21x21`, `random:seed=7,s=10,a=3[,gamma=0.95][,sparsity=0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvName {
    Bandit(BanditKind),
    Bermuda {
        nx: usize,
        ny: usize,
    },
    Random {
        seed: u64,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        sparsity: f64,
    },
    File(String),
}

impl std::str::FromStr for EnvName {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parameter(format!("environment `{text}`: {why}"));
        let (kind, rest) = text.split_once(':').ok_or_else(|| bad("expected `<kind>:<params>`"))?;
        match kind {
            "bandit" => match rest {
                "dense" => Ok(EnvName::Bandit(BanditKind::Dense)),
                "sparse" => Ok(EnvName::Bandit(BanditKind::Sparse)),
                _ => Err(bad("bandit expert must be `dense` or `sparse`")),
            },
            "bermuda" => {
                let (nx, ny) = rest.split_once('x').ok_or_else(|| bad("expected `NXxNY`"))?;
                let nx = nx.parse().map_err(|_| bad("bad grid width"))?;
                let ny = ny.parse().map_err(|_| bad("bad grid height"))?;
                Ok(EnvName::Bermuda { nx, ny })
            }
            "random" => {
                let mut seed = None;
                let mut n_states = None;
                let mut n_actions = None;
                let mut gamma = 0.95;
                let mut sparsity = 0.5;
                for kv in rest.split(',') {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    match k.trim() {
                        "seed" => seed = Some(v.parse().map_err(|_| bad("bad seed"))?),
                        "s" => n_states = Some(v.parse().map_err(|_| bad("bad s"))?),
                        "a" => n_actions = Some(v.parse().map_err(|_| bad("bad a"))?),
                        "gamma" => gamma = v.parse().map_err(|_| bad("bad gamma"))?,
                        "sparsity" => sparsity = v.parse().map_err(|_| bad("bad sparsity"))?,
                        other => return Err(bad(&format!("unknown key `{other}`"))),
                    }
                }
                Ok(EnvName::Random {
                    seed: seed.ok_or_else(|| bad("missing seed"))?,
                    n_states: n_states.unwrap_or(10),
                    n_actions: n_actions.unwrap_or(3),
                    gamma,
                    sparsity,
                })
            }
            "file" => Ok(EnvName::File(rest.to_string())),
            _ => Err(bad("unknown environment kind")),
        }
    }
}

impl EnvName {
    /// Builds the MDP and, where the environment defines one, its expert.
    /// Random environments come with a seeded interior expert.
    pub fn build(&self) -> Result<(TabularMdp, Option<TabularPolicy>)> {
        match self {
            EnvName::Bandit(kind) => {
                let (mdp, expert) = bandit_env(*kind);
                Ok((mdp, Some(expert)))
            }
            EnvName::Bermuda { nx, ny } => {
                let (mdp, expert) = bermuda_grid(*nx, *ny)?;
                Ok((mdp, Some(expert)))
            }
            EnvName::Random {
                seed,
                n_states,
                n_actions,
                gamma,
                sparsity,
            } => {
                let mdp = random_mdp(*seed, *n_states, *n_actions, *gamma, *sparsity)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
                let expert = random_interior_policy(&mut rng, *n_states, *n_actions);
                Ok((mdp, Some(expert)))
            }
            EnvName::File(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Error::Parameter(format!("reading {path}: {e}")))?;
                let mdp: TabularMdp =
                    serde_json::from_str(&text).map_err(|e| Error::InvalidMdp(format!("{path}: {e}")))?;
                Ok((mdp, None))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::visitation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bandit_experts() {
        let (mdp, dense) = bandit_env(BanditKind::Dense);
        assert_eq!(mdp.n_states(), 1);
        assert_eq!(mdp.n_actions(), 4);
        assert_eq!(mdp.gamma(), 0.99);
        assert!(mdp.reward().is_none());
        assert_abs_diff_eq!(dense.row(0).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let (_, sparse) = bandit_env(BanditKind::Sparse);
        assert_eq!(sparse.row(0)[0], 0.0);
        assert_eq!(sparse.row(0)[2], 1.0 / 3.0);
        assert_eq!(sparse.row(0)[3], 2.0 / 3.0);
        let pol = TabularPolicy::new(vec![vec![0.7, 0.1, 0.1, 0.1]]).unwrap();
        let d = visitation(&mdp, &pol).unwrap();
        for a in 0..4 {
            assert_abs_diff_eq!(d.get(0, a), pol.row(0)[a], epsilon = 1e-12);
        }
    }

    #[test]
    fn bermuda_expert_rows_normalized_and_origin_points_up() {
        let (mdp, expert) = bermuda_grid(21, 21).unwrap();
        assert_eq!(mdp.n_states(), 441);
        for s in 0..441 {
            assert_abs_diff_eq!(expert.row(s).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        let geo = BermudaGeometry::new(21, 21).unwrap();
        let origin = geo.index(10, 0);
        assert_eq!(geo.coords(origin), (0.0, 0.0));
        let row = expert.row(origin);
        let best = (0..8).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(BERMUDA_ANGLES[best], 0.5 * PI);
        assert_eq!(best, project_angle(10.0_f64.atan2(0.0)));
    }

    #[test]
    fn bermuda_top_row_absorbing_and_p0_on_bottom_row() {
        let (mdp, _) = bermuda_grid(5, 4).unwrap();
        let geo = BermudaGeometry::new(5, 4).unwrap();
        for i in 0..5 {
            let s = geo.index(i, 3);
            for a in 0..8 {
                assert_eq!(mdp.transition()[s][a][s], 1.0);
            }
            assert_abs_diff_eq!(mdp.p0()[geo.index(i, 0)], 0.2, epsilon = 1e-15);
        }
        // straight up from the bottom left corner, and clamped when moving left
        assert_eq!(geo.step(geo.index(0, 0), 6), geo.index(0, 1));
        assert_eq!(geo.step(geo.index(0, 0), 0), geo.index(0, 0));
        assert_eq!(geo.step(geo.index(2, 1), 5), geo.index(3, 2));
    }

    #[test]
    fn bermuda_expert_reflection_symmetry() {
        let (_, expert) = bermuda_grid(21, 21).unwrap();
        let geo = BermudaGeometry::new(21, 21).unwrap();
        for s in 0..geo.n_states() {
            let rs = geo.reflect_state(s);
            for a in 0..8 {
                let ra = BermudaGeometry::reflect_action(a);
                assert_abs_diff_eq!(expert.row(s)[a], expert.row(rs)[ra], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bermuda_rejects_degenerate_grid() {
        assert!(bermuda_grid(1, 5).is_err());
    }

    #[test]
    fn random_mdp_deterministic_and_valid() {
        let a = random_mdp(7, 10, 3, 0.95, 0.3).unwrap();
        let b = random_mdp(7, 10, 3, 0.95, 0.3).unwrap();
        assert_eq!(a.transition(), b.transition());
        assert_eq!(a.p0(), b.p0());
        let c = random_mdp(8, 10, 3, 0.95, 0.3).unwrap();
        assert_ne!(a.transition(), c.transition());
        let full = random_mdp(1, 6, 2, 0.9, 1.0).unwrap();
        assert!(full
            .transition()
            .iter()
            .flatten()
            .flatten()
            .all(|p| *p > ERGODICITY_FLOOR / 6.0));
        assert!(random_mdp(1, 6, 2, 0.9, 0.0).is_err());
    }

    #[test]
    fn demos_deterministic_action_and_seed() {
        let (mdp, _) = bermuda_grid(5, 5).unwrap();
        let det = TabularPolicy::new(
            (0..25)
                .map(|s| {
                    let mut r = vec![0.0; 8];
                    r[s % 8] = 1.0;
                    r
                })
                .collect(),
        )
        .unwrap();
        let demos = sample_demos(&mdp, &det, 2000, 3).unwrap();
        assert!(demos.pairs.iter().all(|&(s, a)| a == s % 8));
        assert_eq!(demos, sample_demos(&mdp, &det, 2000, 3).unwrap());
        demos.check_against(&mdp).unwrap();
    }

    #[test]
    fn dense_bandit_demo_frequencies() {
        let (mdp, expert) = bandit_env(BanditKind::Dense);
        let demos = sample_demos(&mdp, &expert, 100_000, 17).unwrap();
        let mut counts = [0.0; 4];
        for &(_, a) in &demos.pairs {
            counts[a] += 1.0;
        }
        let freq: Vec<f64> = counts.iter().map(|c| c / 1e5).collect();
        assert!(crate::mdp::total_variation(&freq, &BANDIT_DENSE) <= 0.01);
    }

    #[test]
    fn env_names_parse() {
        assert_eq!(
            "bandit:dense".parse::<EnvName>().unwrap(),
            EnvName::Bandit(BanditKind::Dense)
        );
        assert_eq!(
            "bermuda:21x21".parse::<EnvName>().unwrap(),
            EnvName::Bermuda { nx: 21, ny: 21 }
        );
        match "random:seed=7,s=12,a=4".parse::<EnvName>().unwrap() {
            EnvName::Random {
                seed,
                n_states,
                n_actions,
                ..
            } => {
                assert_eq!((seed, n_states, n_actions), (7, 12, 4))
            }
            other => panic!("{other:?}"),
        }
        assert!("bandit:wide".parse::<EnvName>().is_err());
        assert!("random:s=3".parse::<EnvName>().is_err());
        assert!("nothing".parse::<EnvName>().is_err());
    }
}
