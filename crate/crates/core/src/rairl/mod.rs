//! Adversarial reward learning on tabular MDPs: rollouts from the learner,
//! a structured discriminator step, then policy improvement, repeated.

mod model;
mod policy;

pub use model::{
    discriminator_gradient, discriminator_logit, discriminator_objective, discriminator_step, reward_of_model,
    RewardModel, RewardModelKind,
};
pub use policy::{actor_gradient, actor_objective, behavioral_cloning, policy_improvement, PolicyLearner, PolicyMode};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::bregman_discrete;
use crate::envs::{DemoSet, DiscountedSampler, Transition};
use crate::error::{Error, Result};
use crate::irl::exact_irl_reward;
use crate::mdp::{return_with_reward, total_variation, TabularMdp, TabularPolicy};
use crate::regularizer::RegularizerSpec;

fn default_iterations() -> usize {
    2000
}
fn default_batch() -> usize {
    256
}
fn default_rollout_steps() -> usize {
    64
}
fn default_lr() -> f64 {
    0.05
}
fn default_critic_lr() -> f64 {
    0.2
}
fn default_one() -> usize {
    1
}
fn default_eval_interval() -> usize {
    100
}
fn default_buffer() -> usize {
    50_000
}
fn default_vi_tol() -> f64 {
    1e-8
}
fn default_reg() -> RegularizerSpec {
    RegularizerSpec::shannon(1.0).expect("valid")
}
fn default_model() -> RewardModelKind {
    RewardModelKind::Dbm
}
fn default_mode() -> PolicyMode {
    PolicyMode::ExactVi
}

/// Training hyperparameters. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_rollout_steps")]
    pub rollout_steps_per_iter: usize,
    /// Discriminator updates per iteration.
    #[serde(default = "default_one")]
    pub disc_steps_per_iter: usize,
    /// Policy updates per iteration.
    #[serde(default = "default_one")]
    pub policy_steps_per_iter: usize,
    #[serde(default = "default_lr")]
    pub disc_lr: f64,
    #[serde(default = "default_lr")]
    pub policy_lr: f64,
    /// Critic step size in sampled mode.
    #[serde(default = "default_critic_lr")]
    pub critic_lr: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub policy_mode: PolicyMode,
    #[serde(default = "default_model")]
    pub reward_model: RewardModelKind,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
    /// Rollout replay capacity.
    #[serde(default = "default_buffer")]
    pub buffer_size: usize,
    /// Value-iteration tolerance in exact mode.
    #[serde(default = "default_vi_tol")]
    pub vi_tol: f64,
    #[serde(default = "default_reg")]
    pub reg: RegularizerSpec,
    /// Regularizers whose mean Bregman divergence is logged; the training
    /// regularizer when empty.
    #[serde(default)]
    pub probe_regs: Vec<RegularizerSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("iterations", self.iterations),
            ("batch_size", self.batch_size),
            ("rollout_steps_per_iter", self.rollout_steps_per_iter),
            ("disc_steps_per_iter", self.disc_steps_per_iter),
            ("policy_steps_per_iter", self.policy_steps_per_iter),
            ("eval_interval", self.eval_interval),
            ("buffer_size", self.buffer_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Parameter(format!("{name} must be positive")));
        }
        for (name, lr) in [
            ("disc_lr", self.disc_lr),
            ("policy_lr", self.policy_lr),
            ("critic_lr", self.critic_lr),
            ("vi_tol", self.vi_tol),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {lr}")));
            }
        }
        self.reg.validate()?;
        self.probe_regs.iter().try_for_each(RegularizerSpec::validate)
    }

    pub fn probes(&self) -> Vec<RegularizerSpec> {
        if self.probe_regs.is_empty() {
            vec![self.reg]
        } else {
            self.probe_regs.clone()
        }
    }
}

/// One evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iter: usize,
    pub disc_loss: f64,
    /// Mean Bregman divergence to the expert per probe regularizer.
    pub mean_bregman: Vec<f64>,
    /// Exact regularized return under the environment reward, or under the
    /// expert's IRL reward when the environment has none.
    pub episodic_return: Option<f64>,
    /// Demo-weighted mean total variation to the expert.
    pub policy_tv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub probe_names: Vec<String>,
    pub rows: Vec<MetricsRow>,
}

/// Receives metric rows as they are produced.
pub trait MetricsSink {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()>;
}

impl MetricsSink for Vec<MetricsRow> {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        self.push(row.clone());
        Ok(())
    }
}

/// Streams rows as CSV, flushing after each one.
pub struct CsvMetricsSink<W: Write> {
    out: W,
}

impl<W: Write> CsvMetricsSink<W> {
    pub fn new(mut out: W, probe_names: &[String]) -> std::io::Result<Self> {
        let probes: Vec<String> = probe_names.iter().map(|n| format!("mean_bregman_{n}")).collect();
        writeln!(out, "iter,disc_loss,{},episodic_return,policy_tv", probes.join(","))?;
        out.flush()?;
        Ok(CsvMetricsSink { out })
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl<W: Write> MetricsSink for CsvMetricsSink<W> {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        let probes: Vec<String> = row.mean_bregman.iter().map(f64::to_string).collect();
        writeln!(
            self.out,
            "{},{},{},{},{}",
            row.iter,
            row.disc_loss,
            probes.join(","),
            opt_field(row.episodic_return),
            opt_field(row.policy_tv)
        )?;
        self.out.flush()
    }
}

/// Short column label for a probe regularizer.
pub fn probe_name(spec: &RegularizerSpec) -> String {
    use crate::regularizer::Family;
    match spec.family() {
        Family::Shannon => "shannon".into(),
        Family::Tsallis { q, .. } => format!("tsallis_q{q}"),
        other => other.name().to_string(),
    }
}

/// Result of [`rairl_train`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: TabularPolicy,
    pub model: RewardModel,
    pub metrics: TrainMetrics,
}

/// Weighted evaluation over the demonstrated states, each weighted by its
/// demo count.
#[derive(Debug, Clone)]
struct EvalStates {
    states: Vec<usize>,
    weights: Vec<f64>,
}

impl EvalStates {
    fn from_demos(demos: &DemoSet) -> Self {
        let mut counts = std::collections::BTreeMap::new();
        for &(s, _) in &demos.pairs {
            *counts.entry(s).or_insert(0usize) += 1;
        }
        let total = demos.pairs.len() as f64;
        EvalStates {
            states: counts.keys().copied().collect(),
            weights: counts.values().map(|c| *c as f64 / total).collect(),
        }
    }

    fn mean(&self, f: impl Fn(usize) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (s, w) in self.states.iter().zip(&self.weights) {
            acc += w * f(*s)?;
        }
        Ok(acc)
    }
}

/// Mean Bregman divergence over demo states weighted by demo frequency,
/// the evaluation used for training metrics.
pub fn demo_weighted_bregman(
    policy: &TabularPolicy,
    expert: &TabularPolicy,
    demos: &DemoSet,
    spec: &RegularizerSpec,
) -> Result<f64> {
    EvalStates::from_demos(demos).mean(|s| bregman_discrete(policy.row(s), expert.row(s), spec))
}

fn evaluate(
    iter: usize,
    disc_loss: f64,
    policy: &TabularPolicy,
    mdp: &TabularMdp,
    demos: &DemoSet,
    eval: &EvalStates,
    config: &TrainConfig,
) -> Result<MetricsRow> {
    let expert = demos.expert_policy.as_ref();
    let mean_bregman = match expert {
        Some(e) => config
            .probes()
            .iter()
            .map(|spec| eval.mean(|s| bregman_discrete(policy.row(s), e.row(s), spec)))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let episodic_return = match (mdp.reward(), expert) {
        (Some(r), _) => Some(return_with_reward(mdp, r, policy, &config.reg)?),
        (None, Some(e)) => match exact_irl_reward(e, &config.reg) {
            Ok(t) => Some(return_with_reward(mdp, t.rows(), policy, &config.reg)?),
            Err(_) => None,
        },
        (None, None) => None,
    };
    let policy_tv = match expert {
        Some(e) => Some(eval.mean(|s| Ok(total_variation(policy.row(s), e.row(s))))?),
        None => None,
    };
    Ok(MetricsRow {
        iter,
        disc_loss,
        mean_bregman,
        episodic_return,
        policy_tv,
    })
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T: Copy> ReplayBuffer<T> {
    fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            next: 0,
        }
    }

    fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<T> {
        (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Runs adversarial training, streaming metrics into `sink`. Rows already
/// recorded stay in the sink if training fails part-way.
pub fn rairl_train_with_sink(
    mdp: &TabularMdp,
    demos: &DemoSet,
    config: &TrainConfig,
    sink: &mut dyn MetricsSink,
) -> Result<(TabularPolicy, RewardModel)> {
    config.validate()?;
    demos.check_against(mdp)?;
    if demos.pairs.is_empty() {
        return Err(Error::Parameter("no demonstrations".into()));
    }
    let spec = &config.reg;
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = RewardModel::new(config.reward_model, n_s, n_a);
    let mut learner = match config.policy_mode {
        PolicyMode::ExactVi => PolicyLearner::exact(config.vi_tol),
        PolicyMode::SampledRac => PolicyLearner::sampled(n_s, n_a, config.critic_lr, config.policy_lr),
    };
    let mut policy = learner.policy(n_s, n_a);
    let mut sampler = DiscountedSampler::new(mdp, &mut rng);
    let mut buffer: ReplayBuffer<Transition> = ReplayBuffer::new(config.buffer_size);
    let eval = EvalStates::from_demos(demos);
    let io = |e: std::io::Error| Error::Parameter(format!("metrics sink: {e}"));

    let mut disc_loss = f64::NAN;
    for iter in 1..=config.iterations {
        for _ in 0..config.rollout_steps_per_iter {
            buffer.push(sampler.step(mdp, &policy, &mut rng));
        }
        let t = exact_irl_reward(&policy, spec)?;
        for _ in 0..config.disc_steps_per_iter {
            let demo_batch: Vec<(usize, usize)> = (0..config.batch_size)
                .map(|_| demos.pairs[rng.random_range(0..demos.pairs.len())])
                .collect();
            let roll_batch: Vec<(usize, usize)> = buffer
                .sample(config.batch_size, &mut rng)
                .iter()
                .map(|tr| (tr.state, tr.action))
                .collect();
            disc_loss = -model::step_with_target(&mut model, &demo_batch, &roll_batch, &t, spec, config.disc_lr)?;
        }
        let reward = model.reward_table(spec)?;
        for _ in 0..config.policy_steps_per_iter {
            let batch = match config.policy_mode {
                PolicyMode::ExactVi => Vec::new(),
                PolicyMode::SampledRac => buffer.sample(config.batch_size, &mut rng),
            };
            policy = policy_improvement(&mut learner, &reward, mdp, spec, &batch)?;
        }
        if iter % config.eval_interval == 0 || iter == config.iterations {
            let row = evaluate(iter, disc_loss, &policy, mdp, demos, &eval, config)?;
            sink.record(&row).map_err(io)?;
        }
    }
    Ok((policy, model))
}

/// [`rairl_train_with_sink`] collecting metrics in memory.
pub fn rairl_train(mdp: &TabularMdp, demos: &DemoSet, config: &TrainConfig) -> Result<TrainOutput> {
    let mut rows = Vec::new();
    let (policy, model) = rairl_train_with_sink(mdp, demos, config, &mut rows)?;
    Ok(TrainOutput {
        policy,
        model,
        metrics: TrainMetrics {
            probe_names: config.probes().iter().map(probe_name).collect(),
            rows,
        },
    })
}
