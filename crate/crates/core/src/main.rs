use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regmdp::harness::{self, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(
    name = "regmdp",
    version,
    about = "Regularized MDP solver, IRL and adversarial reward learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds (overrides the config's `seeds`).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the regularized MDP under the configured reward.
    Solve(Common),
    /// Recover the reward that makes the expert optimal.
    Irl {
        #[command(flatten)]
        common: Common,
        /// Re-solve under the recovered reward and check the expert is recovered.
        #[arg(long)]
        verify: bool,
    },
    /// Adversarial reward learning, one run per seed.
    Rairl {
        #[command(flatten)]
        common: Common,
        /// Run seeds in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Gaussian divergence heatmaps, one file per q.
    Divergence(Common),
    /// Run the acceptance and invariant checks.
    Validate {
        /// Only run the checks with these ids.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
        cfg.validate()?;
    }
    let out = harness::resolve_out(&cfg, common.out.clone());
    Ok((cfg, out))
}

fn init_threads() -> Result<(), HarnessError> {
    let Ok(v) = std::env::var("REGMDP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| HarnessError::Config(format!("REGMDP_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    init_threads()?;
    match cli.command {
        Command::Solve(c) => {
            let (cfg, out) = load(&c)?;
            harness::cmd_solve(&cfg, &out)
        }
        Command::Irl { common, verify } => {
            let (cfg, out) = load(&common)?;
            harness::cmd_irl(&cfg, &out, verify)
        }
        Command::Rairl { common, parallel } => {
            let (cfg, out) = load(&common)?;
            harness::cmd_rairl(&cfg, &out, parallel)
        }
        Command::Divergence(c) => {
            let (cfg, out) = load(&c)?;
            harness::cmd_divergence(&cfg, &out)
        }
        Command::Validate { only } => harness::cmd_validate(only.as_deref()).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
