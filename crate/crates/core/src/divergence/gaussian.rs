use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian with diagonal covariance `diag(stddev²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianDoc", into = "GaussianDoc")]
pub struct DiagGaussian {
    mean: Vec<f64>,
    stddev: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianDoc {
    mean: Vec<f64>,
    stddev: Vec<f64>,
}

impl TryFrom<GaussianDoc> for DiagGaussian {
    type Error = Error;
    fn try_from(d: GaussianDoc) -> Result<Self> {
        DiagGaussian::new(d.mean, d.stddev)
    }
}

impl From<DiagGaussian> for GaussianDoc {
    fn from(g: DiagGaussian) -> Self {
        GaussianDoc {
            mean: g.mean,
            stddev: g.stddev,
        }
    }
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, stddev: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != stddev.len() {
            return Err(Error::Parameter(format!(
                "gaussian needs matching non-empty mean and stddev, got {} and {}",
                mean.len(),
                stddev.len()
            )));
        }
        if let Some(i) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::Parameter(format!("mean[{i}] is not finite")));
        }
        if let Some(i) = stddev.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Parameter(format!(
                "stddev[{i}] = {} must be positive",
                stddev[i]
            )));
        }
        Ok(DiagGaussian { mean, stddev })
    }

    pub fn univariate(mean: f64, stddev: f64) -> Result<Self> {
        DiagGaussian::new(vec![mean], vec![stddev])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stddev(&self) -> &[f64] {
        &self.stddev
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.stddev)
            .zip(x)
            .map(|((m, s), x)| {
                let z = (x - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q >= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("entropic index q must be ≥ 1, got {q}")))
    }
}

fn check_dims(a: &DiagGaussian, b: &DiagGaussian) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )))
    }
}

/// `log ∫ p(x)^q dx`, equal to `(1 − q) R_q` with
/// `R_q = Σ_i [log(√(2π) σ_i) − log q / (2(1 − q))]`.
fn log_power_integral(g: &DiagGaussian, q: f64) -> f64 {
    g.stddev
        .iter()
        .map(|s| (1.0 - q) * ((2.0 * PI).sqrt() * s).ln() - 0.5 * q.ln())
        .sum()
}

/// Tsallis entropy `k (1 − ∫p^q) / (q − 1)`; at `q = 1` the differential
/// entropy `k Σ_i log(√(2πe) σ_i)`.
pub fn gaussian_tsallis_entropy(g: &DiagGaussian, q: f64, k: f64) -> Result<f64> {
    check_q(q)?;
    if q == 1.0 {
        let h: f64 = g
            .stddev
            .iter()
            .map(|s| (2.0 * PI * std::f64::consts::E).sqrt().ln() + s.ln())
            .sum();
        return Ok(k * h);
    }
    Ok(-k * log_power_integral(g, q).exp_m1() / (q - 1.0))
}

/// `E_p[f_φ'(p) − φ(p)] = (q − 1) T_q^k(p) − k`.
pub fn gaussian_reward_baseline(g: &DiagGaussian, q: f64, k: f64) -> Result<f64> {
    check_q(q)?;
    if q == 1.0 {
        return Ok(-k);
    }
    Ok((q - 1.0) * gaussian_tsallis_entropy(g, q, k)? - k)
}

/// Log-partition of a univariate Gaussian in natural parameters, written
/// through its precision and mean: `P m² / 2 + ½ log 2π + ½ log(1/P)`.
fn log_partition(precision: f64, mean: f64) -> f64 {
    0.5 * precision * mean * mean + 0.5 * (2.0 * PI).ln() - 0.5 * precision.ln()
}

/// `log ∫ p1(x) p2(x)^{q−1} dx` via the exponential-family identity
/// `F(θ1 + (q−1)θ2) − F(θ1) − (q−1)F(θ2)`.
fn log_cross_integral(g1: &DiagGaussian, g2: &DiagGaussian, q: f64) -> f64 {
    let w = q - 1.0;
    let mut acc = 0.0;
    for i in 0..g1.dim() {
        let (m1, s1) = (g1.mean[i], g1.stddev[i]);
        let (m2, s2) = (g2.mean[i], g2.stddev[i]);
        let (p1, p2) = (1.0 / (s1 * s1), 1.0 / (s2 * s2));
        let p = p1 + w * p2;
        let m = (p1 * m1 + w * p2 * m2) / p;
        acc += log_partition(p, m) - log_partition(p1, m1) - w * log_partition(p2, m2);
    }
    acc
}

/// Bregman divergence of the Tsallis regularizer (`k = 1`):
/// `q/(q−1) (1 − ∫p1 p2^{q−1}) − T_q(p1) − (q−1) T_q(p2)`. `q = 1` is KL.
pub fn gaussian_bregman_tsallis(g1: &DiagGaussian, g2: &DiagGaussian, q: f64) -> Result<f64> {
    check_q(q)?;
    check_dims(g1, g2)?;
    if q == 1.0 {
        return gaussian_kl(g1, g2);
    }
    let cross = -log_cross_integral(g1, g2, q).exp_m1();
    Ok(q / (q - 1.0) * cross
        - gaussian_tsallis_entropy(g1, q, 1.0)?
        - (q - 1.0) * gaussian_tsallis_entropy(g2, q, 1.0)?)
}

/// `KL(g1 || g2)`.
pub fn gaussian_kl(g1: &DiagGaussian, g2: &DiagGaussian) -> Result<f64> {
    check_dims(g1, g2)?;
    Ok((0..g1.dim())
        .map(|i| {
            let (s1, s2) = (g1.stddev[i], g2.stddev[i]);
            let dm = g1.mean[i] - g2.mean[i];
            (s2 / s1).ln() + (s1 * s1 + dm * dm) / (2.0 * s2 * s2) - 0.5
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(m: f64, s: f64) -> DiagGaussian {
        DiagGaussian::univariate(m, s).unwrap()
    }

    #[test]
    fn validation() {
        assert!(DiagGaussian::new(vec![0.0], vec![0.0]).is_err());
        assert!(DiagGaussian::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(DiagGaussian::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(gaussian_tsallis_entropy(&g(0.0, 1.0), 0.5, 1.0).is_err());
        assert!(serde_json::from_str::<DiagGaussian>(r#"{"mean":[0],"stddev":[1],"x":1}"#).is_err());
        assert!(serde_json::from_str::<DiagGaussian>(r#"{"mean":[0],"stddev":[-1]}"#).is_err());
    }

    #[test]
    fn entropy_examples() {
        let one_minus = 1.0 - 1.0 / (2.0 * PI.sqrt());
        assert_abs_diff_eq!(
            gaussian_tsallis_entropy(&g(0.0, 1.0), 2.0, 1.0).unwrap(),
            one_minus,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(one_minus, 0.717905, epsilon = 1e-6);
        let g2 = DiagGaussian::new(vec![1.0, -2.0], vec![0.5, 1.7]).unwrap();
        let want = 1.0 - 1.0 / (2.0 * 0.5 * PI.sqrt()) / (2.0 * 1.7 * PI.sqrt());
        assert_abs_diff_eq!(gaussian_tsallis_entropy(&g2, 2.0, 1.0).unwrap(), want, epsilon = 1e-12);
        let h = gaussian_tsallis_entropy(&g(3.0, 2.0), 1.0, 1.5).unwrap();
        assert_abs_diff_eq!(
            h,
            1.5 * (0.5 * (2.0 * PI * std::f64::consts::E).ln() + 2.0_f64.ln()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(gaussian_reward_baseline(&g(0.0, 3.0), 1.0, 2.0).unwrap(), -2.0);
        assert_abs_diff_eq!(
            gaussian_reward_baseline(&g(0.0, 1.0), 2.0, 1.0).unwrap(),
            -1.0 / (2.0 * PI.sqrt()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bregman_examples() {
        let a = g(0.5, 0.8);
        for q in [1.0, 1.3, 2.0, 3.0] {
            assert_abs_diff_eq!(gaussian_bregman_tsallis(&a, &a, q).unwrap(), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            gaussian_bregman_tsallis(&g(1.0, 1.0), &g(0.0, 1.0), 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(gaussian_kl(&g(1.0, 1.0), &g(0.0, 1.0)).unwrap(), 0.5, epsilon = 1e-15);
        // q = 2 is the squared L2 distance between densities
        let (p1, p2) = (g(0.5, 0.8), g(0.0, 0.3));
        let sq = |s: f64| 1.0 / (2.0 * s * PI.sqrt());
        let s2 = 0.8f64 * 0.8 + 0.3 * 0.3;
        let cross = (-0.25 / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
        let want = sq(0.8) + sq(0.3) - 2.0 * cross;
        assert_abs_diff_eq!(gaussian_bregman_tsallis(&p1, &p2, 2.0).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn continuity_near_q_one() {
        let (a, b) = (g(0.3, 0.7), g(-0.2, 1.1));
        let kl = gaussian_kl(&a, &b).unwrap();
        let near = gaussian_bregman_tsallis(&a, &b, 1.0 + 1e-6).unwrap();
        assert_abs_diff_eq!(near, kl, epsilon = 1e-4);
    }
}
