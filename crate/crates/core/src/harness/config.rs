use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::divergence::DiagGaussian;
use crate::envs::EnvName;
use crate::rairl::TrainConfig;
use crate::regularizer::RegularizerSpec;

fn default_reg() -> RegularizerSpec {
    RegularizerSpec::shannon(1.0).expect("valid")
}
fn default_tol() -> f64 {
    1e-10
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Demonstration sampling for `rairl`. Run seed `k` draws its demos with
/// seed `seed + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub n_pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n_pairs: 10_000,
            seed: 0,
        }
    }
}

/// Gaussian heatmap settings for `divergence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub expert: DiagGaussian,
    pub mu_range: (f64, f64),
    pub log_sigma_range: (f64, f64),
    pub resolution: (usize, usize),
    pub qs: Vec<f64>,
}

/// One JSON document configures every subcommand; each command reads the
/// sections it needs and rejects a document missing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `bandit:dense`, `bermuda:21x21`, `random:seed=7,s=10,a=3`, `file:<path>`.
    #[serde(default)]
    pub env: Option<String>,
    /// Replaces the environment's reward table.
    #[serde(default)]
    pub reward: Option<Vec<Vec<f64>>>,
    /// Replaces the environment's expert policy.
    #[serde(default)]
    pub expert: Option<Vec<Vec<f64>>>,
    /// Regularizer for `solve` and `irl`; `rairl` uses `train.reg`.
    #[serde(default = "default_reg")]
    pub reg: RegularizerSpec,
    /// Value-iteration tolerance for `solve` and `irl --verify`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub demos: DemoConfig,
    #[serde(default)]
    pub heatmap: Option<HeatmapConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(env) = &self.env {
            env.parse::<EnvName>()?;
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(HarnessError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        if self.demos.n_pairs == 0 {
            return Err(HarnessError::Config("demos.n_pairs must be positive".into()));
        }
        self.train.validate()?;
        if let Some(h) = &self.heatmap {
            if h.qs.is_empty() {
                return Err(HarnessError::Config("heatmap.qs must not be empty".into()));
            }
            if let Some(q) = h.qs.iter().find(|q| !(q.is_finite() && **q >= 1.0)) {
                return Err(HarnessError::Config(format!("heatmap q must be ≥ 1, got {q}")));
            }
        }
        Ok(())
    }

    pub fn env_name(&self) -> Result<EnvName, HarnessError> {
        self.env
            .as_deref()
            .ok_or_else(|| HarnessError::Config("config needs an `env`".into()))?
            .parse()
            .map_err(HarnessError::from)
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
