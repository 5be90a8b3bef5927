//! Independent numeric estimates of the Gaussian closed forms: Monte Carlo
//! in any dimension, adaptive Simpson quadrature in one dimension.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gaussian::DiagGaussian;
use crate::error::{Error, Result};

/// Half-width of the quadrature window in standard deviations.
const QUAD_SIGMAS: i32 = 12;
const SIMPSON_MAX_DEPTH: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMethod {
    MonteCarlo {
        n: usize,
        seed: u64,
    },
    /// Absolute tolerance for the adaptive Simpson rule.
    Quadrature {
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleTarget {
    /// Tsallis entropy `T_q^k`.
    Entropy { q: f64, k: f64 },
    /// `E_p[f_φ'(p) − φ(p)]`.
    Baseline { q: f64, k: f64 },
    /// Tsallis Bregman divergence from the oracle's Gaussian to `expert`.
    Bregman { expert: DiagGaussian, q: f64 },
    /// `KL(g || other)`.
    Kl { other: DiagGaussian },
}

/// Estimate of the Tsallis entropy of `g`.
pub fn numeric_entropy_oracle(g: &DiagGaussian, q: f64, k: f64, method: OracleMethod) -> Result<(f64, Option<f64>)> {
    numeric_oracle(g, &OracleTarget::Entropy { q, k }, method)
}

/// Numeric estimate of `target` evaluated at `g`, with a standard error for
/// Monte Carlo.
pub fn numeric_oracle(g: &DiagGaussian, target: &OracleTarget, method: OracleMethod) -> Result<(f64, Option<f64>)> {
    let q = match target {
        OracleTarget::Entropy { q, .. } | OracleTarget::Baseline { q, .. } | OracleTarget::Bregman { q, .. } => *q,
        OracleTarget::Kl { .. } => 1.0,
    };
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("entropic index q must be ≥ 1, got {q}")));
    }
    if let OracleTarget::Bregman { expert: other, .. } | OracleTarget::Kl { other } = target {
        if other.dim() != g.dim() {
            return Err(Error::Parameter("dimension mismatch".into()));
        }
    }
    // Each target is Σ_j E_{p_j}[h_j(x)] over one or two sampling laws.
    let terms = integrand_terms(g, target);
    match method {
        OracleMethod::MonteCarlo { n, seed } => {
            if n < 2 {
                return Err(Error::Parameter("Monte Carlo needs at least two samples".into()));
            }
            let mut est = 0.0;
            let mut var = 0.0;
            for (j, (law, h)) in terms.iter().enumerate() {
                let (m, se) = monte_carlo(law, h.as_ref(), n, seed.wrapping_add(j as u64));
                est += m;
                var += se * se;
            }
            Ok((est, Some(var.sqrt())))
        }
        OracleMethod::Quadrature { tol } => {
            if g.dim() != 1 {
                return Err(Error::Parameter("quadrature oracle is one-dimensional".into()));
            }
            let laws: Vec<&DiagGaussian> = terms.iter().map(|(law, _)| *law).collect();
            let breaks = breakpoints(&laws);
            let f = |x: f64| {
                terms
                    .iter()
                    .map(|(law, h)| {
                        let p = law.density(&[x]);
                        if p > 0.0 {
                            p * h(&[x])
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
            };
            let seg_tol = tol / (breaks.len() - 1) as f64;
            let total = breaks
                .windows(2)
                .map(|w| adaptive_simpson(&f, w[0], w[1], seg_tol))
                .sum();
            Ok((total, None))
        }
    }
}

type Integrand<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

fn integrand_terms<'a>(g: &'a DiagGaussian, target: &'a OracleTarget) -> Vec<(&'a DiagGaussian, Integrand<'a>)> {
    match target {
        OracleTarget::Entropy { q, k } => {
            let (q, k) = (*q, *k);
            let h: Integrand = if q == 1.0 {
                Box::new(move |x| -k * g.log_density(x))
            } else {
                Box::new(move |x| -k * ((q - 1.0) * g.log_density(x)).exp_m1() / (q - 1.0))
            };
            vec![(g, h)]
        }
        OracleTarget::Baseline { q, k } => {
            let (q, k) = (*q, *k);
            vec![(g, Box::new(move |x| -k * ((q - 1.0) * g.log_density(x)).exp()))]
        }
        OracleTarget::Kl { other } => vec![(g, Box::new(move |x| g.log_density(x) - other.log_density(x)))],
        OracleTarget::Bregman { expert, q } => {
            let q = *q;
            if q == 1.0 {
                return vec![(g, Box::new(move |x| g.log_density(x) - expert.log_density(x)))];
            }
            let w = q - 1.0;
            // E_{p1}[f'(p2) − φ(p1)] − E_{p2}[f'(p2) − φ(p2)], k = 1
            vec![
                (
                    g,
                    Box::new(move |x| ((w * g.log_density(x)).exp() - q * (w * expert.log_density(x)).exp()) / w),
                ),
                (expert, Box::new(move |x| (w * expert.log_density(x)).exp())),
            ]
        }
    }
}

fn monte_carlo(law: &DiagGaussian, h: &dyn Fn(&[f64]) -> f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; law.dim()];
    // Welford accumulation
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        for (j, xj) in x.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xj = law.mean()[j] + law.stddev()[j] * z;
        }
        let v = h(&x);
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Segment ends at every integer number of standard deviations from each
/// law's mean, so narrow and wide components are both resolved.
fn breakpoints(laws: &[&DiagGaussian]) -> Vec<f64> {
    let lo = laws
        .iter()
        .map(|g| g.mean()[0] - QUAD_SIGMAS as f64 * g.stddev()[0])
        .fold(f64::INFINITY, f64::min);
    let hi = laws
        .iter()
        .map(|g| g.mean()[0] + QUAD_SIGMAS as f64 * g.stddev()[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut pts = vec![lo, hi];
    for g in laws {
        for i in -QUAD_SIGMAS..=QUAD_SIGMAS {
            pts.push(g.mean()[0] + i as f64 * g.stddev()[0]);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    pts
}

/// Adaptive Simpson rule with Richardson correction.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::gaussian::{gaussian_bregman_tsallis, gaussian_kl, gaussian_tsallis_entropy};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn g(m: f64, s: f64) -> DiagGaussian {
        DiagGaussian::univariate(m, s).unwrap()
    }

    #[test]
    fn simpson_polynomial_and_gaussian() {
        assert_abs_diff_eq!(
            adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12),
            4.0,
            epsilon = 1e-12
        );
        let n = g(0.0, 1.0);
        let mass = adaptive_simpson(&|x: f64| n.density(&[x]), -12.0, 12.0, 1e-12);
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn quadrature_known_entropy() {
        let (v, se) = numeric_entropy_oracle(&g(0.0, 1.0), 2.0, 1.0, OracleMethod::Quadrature { tol: 1e-10 }).unwrap();
        assert!(se.is_none());
        assert_abs_diff_eq!(v, 1.0 - 1.0 / (2.0 * PI.sqrt()), epsilon = 1e-8);
    }

    #[test]
    fn quadrature_bregman_example() {
        let (a, b) = (g(0.5, 0.8), g(0.0, 0.3));
        let target = OracleTarget::Bregman {
            expert: b.clone(),
            q: 2.0,
        };
        let (v, _) = numeric_oracle(&a, &target, OracleMethod::Quadrature { tol: 1e-10 }).unwrap();
        assert_abs_diff_eq!(v, gaussian_bregman_tsallis(&a, &b, 2.0).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn mc_reproducible_and_k_linear() {
        let x = DiagGaussian::new(vec![0.2, -1.0], vec![0.7, 1.4]).unwrap();
        let m = OracleMethod::MonteCarlo { n: 20_000, seed: 5 };
        let a = numeric_entropy_oracle(&x, 1.5, 1.0, m).unwrap();
        assert_eq!(a, numeric_entropy_oracle(&x, 1.5, 1.0, m).unwrap());
        let b = numeric_entropy_oracle(&x, 1.5, 3.0, m).unwrap();
        assert_abs_diff_eq!(b.0, 3.0 * a.0, epsilon = 1e-12);
        let exact = gaussian_tsallis_entropy(&x, 1.5, 1.0).unwrap();
        assert!((a.0 - exact).abs() <= 3.0 * a.1.unwrap());
    }

    #[test]
    fn mc_kl() {
        let (a, b) = (g(1.0, 1.0), g(0.0, 1.0));
        let (v, se) = numeric_oracle(
            &a,
            &OracleTarget::Kl { other: b.clone() },
            OracleMethod::MonteCarlo { n: 100_000, seed: 1 },
        )
        .unwrap();
        assert!((v - gaussian_kl(&a, &b).unwrap()).abs() <= 3.0 * se.unwrap());
    }

    #[test]
    fn quadrature_rejects_multivariate() {
        let x = DiagGaussian::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(numeric_entropy_oracle(&x, 2.0, 1.0, OracleMethod::Quadrature { tol: 1e-10 }).is_err());
    }
}
