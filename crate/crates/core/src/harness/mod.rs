//! Experiment orchestration behind the `regmdp` binary. Each command reads
//! an [`ExperimentConfig`], writes CSV/JSON into an output directory next to
//! a copy of the resolved config, and reports failures as [`HarnessError`]
//! whose [`exit_code`](HarnessError::exit_code) the binary returns.

mod config;
mod stats;

pub use config::{DemoConfig, ExperimentConfig, HeatmapConfig};
pub use stats::{mean_and_halfwidth, t_quantile_975};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::divergence::heatmap_grid;
use crate::envs::sample_demos;
use crate::error::Error;
use crate::irl::{exact_irl_reward, RewardTable};
use crate::mdp::{total_variation, value_iteration_in_place, value_iteration_with_reward, TabularMdp, TabularPolicy};
use crate::rairl::{probe_name, rairl_train_with_sink, CsvMetricsSink, MetricsRow, MetricsSink, TrainConfig};
use crate::validation::{run_suite, CheckReport};

/// Largest per-state total variation `irl --verify` accepts.
pub const VERIFY_TV_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Numeric(_) => 2,
            HarnessError::Invariant(_) => 3,
        }
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain(_)
            | Error::NonConvergence { .. }
            | Error::Bracket(_)
            | Error::Singular(_)
            | Error::Conjugacy { .. } => HarnessError::Numeric(msg),
            Error::Parameter(_)
            | Error::InvalidDistribution(_)
            | Error::InvalidMdp(_)
            | Error::InvalidPolicy(_)
            | Error::SupportMismatch { .. }
            | Error::Index(_)
            | Error::StepSize { .. }
            | Error::MissingReward => HarnessError::Config(msg),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Config(format!("writing {}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), HarnessError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Creates `out` and records the resolved config there.
fn prepare_out(cfg: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut resolved = cfg.clone();
    resolved.out = out.to_path_buf();
    write_file(&out.join("resolved_config.json"), |w| {
        writeln!(w, "{}", resolved.to_pretty_json())
    })
}

fn write_policy_csv(policy: &TabularPolicy, w: &mut impl Write) -> std::io::Result<()> {
    let cols: Vec<String> = (0..policy.n_actions()).map(|a| format!("a{a}")).collect();
    writeln!(w, "s,{}", cols.join(","))?;
    for (s, row) in policy.rows().iter().enumerate() {
        let vals: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{s},{}", vals.join(","))?;
    }
    Ok(())
}

/// Environment with the config's reward and expert overrides applied.
fn build_env(cfg: &ExperimentConfig) -> Result<(TabularMdp, Option<TabularPolicy>), HarnessError> {
    let (mut mdp, mut expert) = cfg.env_name()?.build()?;
    if let Some(r) = &cfg.reward {
        mdp = mdp.with_reward(r.clone())?;
    }
    if let Some(p) = &cfg.expert {
        let p = TabularPolicy::new(p.clone())?;
        p.check_against(&mdp)?;
        expert = Some(p);
    }
    Ok((mdp, expert))
}

fn require_expert(expert: Option<TabularPolicy>) -> Result<TabularPolicy, HarnessError> {
    expert.ok_or_else(|| HarnessError::Config("environment has no expert; set `expert` in the config".into()))
}

/// Solves the regularized MDP; writes `value_solution.json` and `policy.csv`.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    let (mdp, _) = build_env(cfg)?;
    let reward = mdp.require_reward()?;
    let sol = value_iteration_with_reward(&mdp, reward, &cfg.reg, cfg.tol, None)?;
    prepare_out(cfg, out)?;
    write_file(&out.join("value_solution.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &sol)?;
        writeln!(w)
    })?;
    write_file(&out.join("policy.csv"), |w| write_policy_csv(&sol.policy, w))?;
    println!("solved in {} sweeps", sol.sweeps);
    Ok(())
}

/// Largest per-state total variation between the policy that is optimal
/// under `reward` and `expert`.
pub fn round_trip_tv(
    mdp: &TabularMdp,
    reward: &RewardTable,
    expert: &TabularPolicy,
    cfg: &ExperimentConfig,
) -> Result<f64, HarnessError> {
    let sol = value_iteration_in_place(mdp, reward.rows(), &cfg.reg, cfg.tol, None)?;
    Ok(sol
        .policy
        .rows()
        .iter()
        .zip(expert.rows())
        .map(|(p, q)| total_variation(p, q))
        .fold(0.0, f64::max))
}

/// Writes the expert's IRL reward to `irl_reward.csv`. With `verify`, solves
/// the MDP under that reward and fails when the recovered policy is more than
/// [`VERIFY_TV_TOL`] from the expert in any state.
pub fn cmd_irl(cfg: &ExperimentConfig, out: &Path, verify: bool) -> Result<(), HarnessError> {
    let (mdp, expert) = build_env(cfg)?;
    let expert = require_expert(expert)?;
    let reward = exact_irl_reward(&expert, &cfg.reg)?;
    prepare_out(cfg, out)?;
    write_file(&out.join("irl_reward.csv"), |w| reward.write_csv(w))?;
    if verify {
        let tv = round_trip_tv(&mdp, &reward, &expert, cfg)?;
        println!("max per-state TV to expert: {tv:e}");
        if !(tv <= VERIFY_TV_TOL) {
            return Err(HarnessError::Invariant(format!(
                "round-trip TV {tv:e} exceeds {VERIFY_TV_TOL:e}"
            )));
        }
    }
    Ok(())
}

/// Streams CSV and keeps rows for aggregation.
struct TeeSink<W: Write> {
    csv: CsvMetricsSink<W>,
    rows: Vec<MetricsRow>,
}

impl<W: Write> MetricsSink for TeeSink<W> {
    fn record(&mut self, row: &MetricsRow) -> std::io::Result<()> {
        self.rows.push(row.clone());
        self.csv.record(row)
    }
}

struct SeedRun {
    rows: Vec<MetricsRow>,
    reward: RewardTable,
}

fn run_seed(
    mdp: &TabularMdp,
    expert: &TabularPolicy,
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
) -> Result<SeedRun, HarnessError> {
    let demos = sample_demos(mdp, expert, cfg.demos.n_pairs, cfg.demos.seed.wrapping_add(seed))?;
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let probes: Vec<String> = train.probes().iter().map(probe_name).collect();
    let metrics_path = out.join(format!("metrics_seed{seed}.csv"));
    let csv = CsvMetricsSink::new(create(&metrics_path)?, &probes).map_err(io_err(&metrics_path))?;
    let mut sink = TeeSink { csv, rows: Vec::new() };
    let (policy, model) = rairl_train_with_sink(mdp, &demos, &train, &mut sink)?;
    let reward = model.reward_table(&train.reg)?;
    write_file(&out.join(format!("reward_seed{seed}.csv")), |w| reward.write_csv(w))?;
    write_file(&out.join(format!("policy_seed{seed}.csv")), |w| {
        write_policy_csv(&policy, w)
    })?;
    Ok(SeedRun {
        rows: sink.rows,
        reward,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_interval(w: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    let (m, h) = mean_and_halfwidth(xs);
    write!(w, ",{},{}", m, fmt_opt(h))
}

/// Per-evaluation mean and 95% half-width across seeds. Rows line up by
/// position; every run shares the iteration schedule.
fn write_metrics_aggregate(w: &mut impl Write, probes: &[String], runs: &[&SeedRun]) -> std::io::Result<()> {
    let mut header = vec!["iter".to_string(), "n_seeds".to_string()];
    let mut names = vec!["disc_loss".to_string()];
    names.extend(probes.iter().map(|p| format!("mean_bregman_{p}")));
    names.push("episodic_return".into());
    names.push("policy_tv".into());
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_ci95"));
    }
    writeln!(w, "{}", header.join(","))?;
    let n_rows = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    for i in 0..n_rows {
        let rows: Vec<&MetricsRow> = runs.iter().map(|r| &r.rows[i]).collect();
        write!(w, "{},{}", rows[0].iter, rows.len())?;
        write_interval(w, &rows.iter().map(|r| r.disc_loss).collect::<Vec<_>>())?;
        for k in 0..probes.len() {
            write_interval(w, &rows.iter().map(|r| r.mean_bregman[k]).collect::<Vec<_>>())?;
        }
        for get in [|r: &MetricsRow| r.episodic_return, |r: &MetricsRow| r.policy_tv] {
            let xs: Option<Vec<f64>> = rows.iter().map(|r| get(r)).collect();
            match xs {
                Some(xs) => write_interval(w, &xs)?,
                None => write!(w, ",,")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Learned reward per (s, a) across seeds, raw and centered per state.
fn write_reward_aggregate(w: &mut impl Write, runs: &[&SeedRun]) -> std::io::Result<()> {
    writeln!(w, "s,a,r_mean,r_ci95,r_centered_mean,r_centered_ci95")?;
    let centered: Vec<RewardTable> = runs.iter().map(|r| r.reward.mean_centered()).collect();
    let first = &runs[0].reward;
    for s in 0..first.n_states() {
        for a in 0..first.n_actions() {
            write!(w, "{s},{a}")?;
            write_interval(w, &runs.iter().map(|r| r.reward.get(s, a)).collect::<Vec<_>>())?;
            write_interval(w, &centered.iter().map(|r| r.get(s, a)).collect::<Vec<_>>())?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Trains once per seed, sequentially or in parallel, then aggregates the
/// seeds that finished. A failing seed is reported and the rest continue;
/// the first failure decides the error returned.
pub fn cmd_rairl(cfg: &ExperimentConfig, out: &Path, parallel: bool) -> Result<(), HarnessError> {
    let (mdp, expert) = build_env(cfg)?;
    let expert = require_expert(expert)?;
    prepare_out(cfg, out)?;
    let run = |&seed: &u64| {
        let r = run_seed(&mdp, &expert, cfg, seed, out);
        match &r {
            Ok(_) => eprintln!("seed {seed}: done"),
            Err(e) => eprintln!("seed {seed}: {e}"),
        }
        r
    };
    let results: Vec<Result<SeedRun, HarnessError>> = if parallel {
        cfg.seeds.par_iter().map(run).collect()
    } else {
        cfg.seeds.iter().map(run).collect()
    };
    let ok: Vec<&SeedRun> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    if !ok.is_empty() {
        let probes: Vec<String> = cfg.train.probes().iter().map(probe_name).collect();
        write_file(&out.join("metrics_aggregate.csv"), |w| {
            write_metrics_aggregate(w, &probes, &ok)
        })?;
        write_file(&out.join("reward_aggregate.csv"), |w| write_reward_aggregate(w, &ok))?;
    }
    match results.into_iter().find_map(|r| r.err()) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// File name for the heatmap at order `q`.
pub fn heatmap_file_name(q: f64) -> String {
    format!("heatmap_q{q}.csv")
}

/// Writes one normalized heatmap CSV per requested `q`.
pub fn cmd_divergence(cfg: &ExperimentConfig, out: &Path) -> Result<(), HarnessError> {
    let h = cfg
        .heatmap
        .as_ref()
        .ok_or_else(|| HarnessError::Config("config needs a `heatmap` section".into()))?;
    let maps =
        h.qs.iter()
            .map(|&q| heatmap_grid(&h.expert, h.mu_range, h.log_sigma_range, h.resolution, q))
            .collect::<crate::Result<Vec<_>>>()?;
    prepare_out(cfg, out)?;
    for map in &maps {
        write_file(&out.join(heatmap_file_name(map.q)), |w| map.write_csv(w))?;
    }
    Ok(())
}

/// Runs the acceptance and invariant suite (optionally a subset by id),
/// printing one line per check.
pub fn cmd_validate(only: Option<&[String]>) -> Result<Vec<CheckReport>, HarnessError> {
    let reports = run_suite(only, |r| println!("{r}"));
    if reports.is_empty() {
        return Err(HarnessError::Config("no checks matched the requested ids".into()));
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let passed = reports.len() - failed.len();
    println!("{passed}/{} checks passed", reports.len());
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(HarnessError::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}

/// Output directory: the command-line value, else the config's.
pub fn resolve_out(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.out.clone())
}
