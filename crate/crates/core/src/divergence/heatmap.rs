use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::gaussian::{gaussian_bregman_tsallis, DiagGaussian};
use crate::error::{Error, Result};

/// Divergence from `N(μ, σ²)` to an expert over a `(μ, log σ)` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub q: f64,
    pub mus: Vec<f64>,
    pub log_sigmas: Vec<f64>,
    /// Unnormalized divergences, indexed `[mu][log_sigma]`.
    pub raw: Vec<Vec<f64>>,
    pub max: f64,
}

impl Heatmap {
    /// Divergences divided by their maximum.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.raw
            .iter()
            .map(|row| row.iter().map(|v| v / self.max).collect())
            .collect()
    }

    /// Fraction of cells whose normalized value is below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        let n = self.mus.len() * self.log_sigmas.len();
        let hits = self.raw.iter().flatten().filter(|v| **v / self.max < threshold).count();
        hits as f64 / n as f64
    }

    /// `(mu index, log_sigma index)` of the smallest cell.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.raw.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v < self.raw[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }

    /// CSV with header `mu,log_sigma,value` holding normalized values.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "mu,log_sigma,value")?;
        for (i, mu) in self.mus.iter().enumerate() {
            for (j, ls) in self.log_sigmas.iter().enumerate() {
                writeln!(w, "{mu},{ls},{}", self.raw[i][j] / self.max)?;
            }
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Grid of divergences `D(N(μ, σ²) || expert)` normalized so the largest
/// cell is 1. Rows are computed in parallel.
pub fn heatmap_grid(
    expert: &DiagGaussian,
    mu_range: (f64, f64),
    log_sigma_range: (f64, f64),
    resolution: (usize, usize),
    q: f64,
) -> Result<Heatmap> {
    if expert.dim() != 1 {
        return Err(Error::Parameter("heatmap expert must be one-dimensional".into()));
    }
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::Parameter(format!(
            "heatmap resolution must be ≥ 2 per axis, got {resolution:?}"
        )));
    }
    if !(mu_range.0 < mu_range.1 && log_sigma_range.0 < log_sigma_range.1) {
        return Err(Error::Parameter("heatmap ranges must be increasing".into()));
    }
    let mus = linspace(mu_range.0, mu_range.1, resolution.0);
    let log_sigmas = linspace(log_sigma_range.0, log_sigma_range.1, resolution.1);
    let raw = mus
        .par_iter()
        .map(|&mu| {
            log_sigmas
                .iter()
                .map(|&ls| gaussian_bregman_tsallis(&DiagGaussian::univariate(mu, ls.exp())?, expert, q))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let max = raw.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::Domain(format!("heatmap maximum is {max}")));
    }
    Ok(Heatmap {
        q,
        mus,
        log_sigmas,
        raw,
        max,
    })
}
