//! Policy regularizers of the form `Ω(p) = -λ Σ_a p(a) φ(p(a))`.
//!
//! Each family is described by its scalar function `φ` on `(0, 1]`. Every
//! solver in this crate works through a handful of derived quantities:
//!
//! * `f_φ(x) = x φ(x)`, strictly concave on `(0, 1]`;
//! * its derivative `f_φ'`, strictly decreasing, which drives both the
//!   optimal-policy map and the closed-form IRL reward;
//! * `g_φ`, the inverse of `f_φ'`, clamped to `[0, 1]`.
//!
//! | family  | φ(x)                       | f_φ'(x)                                   |
//! |---------|----------------------------|-------------------------------------------|
//! | Shannon | −log x                     | −log x − 1                                |
//! | Tsallis | k/(q−1) (1 − x^(q−1))      | k/(q−1) (1 − q x^(q−1))                   |
//! | Exp     | q − x^k q^x                | q − x^k q^x (k + 1 + x log q)             |
//! | Cos     | cos(θx) − cos θ            | cos(θx) − cos θ − θx sin(θx)              |
//! | Sin     | sin θ − sin(θx)            | sin θ − sin(θx) − θx cos(θx)              |

use std::f64::consts::{E, FRAC_PI_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a probability vector.
pub const DISTRIBUTION_TOL: f64 = 1e-9;

/// Largest θ for which `x (sin θ − sin θx)` is concave on `(0, 1]`: the root
/// of `u tan u = 2`. Beyond it `f_φ'` turns upward near `x = 1`.
pub const SIN_THETA_MAX: f64 = 1.076_873_986_311_814_9;

/// Default θ for the Sin family.
pub const SIN_THETA_DEFAULT: f64 = 1.0;

const G_TOL: f64 = 1e-12;
const G_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Shannon,
    Tsallis { k: f64, q: f64 },
    Exp { k: f64, q: f64 },
    Cos { theta: f64 },
    Sin { theta: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Shannon => "shannon",
            Family::Tsallis { .. } => "tsallis",
            Family::Exp { .. } => "exp",
            Family::Cos { .. } => "cos",
            Family::Sin { .. } => "sin",
        }
    }
}

/// A validated regularizer: family parameters plus the scale `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct RegularizerSpec {
    family: Family,
    lambda: f64,
}

impl RegularizerSpec {
    pub fn new(family: Family, lambda: f64) -> Result<Self> {
        let spec = RegularizerSpec { family, lambda };
        spec.validate()?;
        Ok(spec)
    }

    pub fn shannon(lambda: f64) -> Result<Self> {
        Self::new(Family::Shannon, lambda)
    }

    pub fn tsallis(lambda: f64, k: f64, q: f64) -> Result<Self> {
        Self::new(Family::Tsallis { k, q }, lambda)
    }

    /// `φ(x) = e − e^x`.
    pub fn exp(lambda: f64) -> Result<Self> {
        Self::new(Family::Exp { k: 0.0, q: E }, lambda)
    }

    pub fn exp_with(lambda: f64, k: f64, q: f64) -> Result<Self> {
        Self::new(Family::Exp { k, q }, lambda)
    }

    /// `φ(x) = cos(πx/2)`.
    pub fn cos(lambda: f64) -> Result<Self> {
        Self::new(Family::Cos { theta: FRAC_PI_2 }, lambda)
    }

    pub fn cos_with(lambda: f64, theta: f64) -> Result<Self> {
        Self::new(Family::Cos { theta }, lambda)
    }

    pub fn sin(lambda: f64) -> Result<Self> {
        Self::new(
            Family::Sin {
                theta: SIN_THETA_DEFAULT,
            },
            lambda,
        )
    }

    pub fn sin_with(lambda: f64, theta: f64) -> Result<Self> {
        Self::new(Family::Sin { theta }, lambda)
    }

    /// One representative of each family at scale `lambda`.
    pub fn all_families(lambda: f64) -> Vec<RegularizerSpec> {
        vec![
            Self::shannon(lambda).unwrap(),
            Self::tsallis(lambda, 1.0, 2.0).unwrap(),
            Self::exp(lambda).unwrap(),
            Self::cos(lambda).unwrap(),
            Self::sin(lambda).unwrap(),
        ]
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Parameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        match self.family {
            Family::Shannon => Ok(()),
            Family::Tsallis { k, q } => {
                if !(k.is_finite() && k > 0.0) {
                    return Err(Error::Parameter(format!("tsallis k must be > 0, got {k}")));
                }
                if !(q.is_finite() && q > 1.0) {
                    return Err(Error::Parameter(format!("tsallis q must be > 1, got {q}")));
                }
                Ok(())
            }
            Family::Exp { k, q } => {
                if !(k.is_finite() && k >= 0.0) {
                    return Err(Error::Parameter(format!("exp k must be >= 0, got {k}")));
                }
                if !(q.is_finite() && q >= 1.0) {
                    return Err(Error::Parameter(format!("exp q must be >= 1, got {q}")));
                }
                if k == 0.0 && q == 1.0 {
                    return Err(Error::Parameter("exp with k = 0 and q = 1 gives φ ≡ 0".into()));
                }
                Ok(())
            }
            Family::Cos { theta } => {
                if !(theta > 0.0 && theta <= FRAC_PI_2) {
                    return Err(Error::Parameter(format!("cos theta must lie in (0, π/2], got {theta}")));
                }
                Ok(())
            }
            Family::Sin { theta } => {
                if !(theta > 0.0 && theta <= SIN_THETA_MAX) {
                    return Err(Error::Parameter(format!(
                        "sin theta must lie in (0, {SIN_THETA_MAX}] for x·φ(x) to be concave, got {theta}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `φ(x)` for `x ∈ (0, 1]`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.phi_raw(x))
    }

    /// `f_φ'(x) = d/dx (x φ(x))` for `x ∈ (0, 1]`.
    pub fn f_phi_prime(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.f_prime_raw(x))
    }

    /// `f_φ(x) = x φ(x)`, extended by its limit 0 at `x = 0`.
    pub fn f_phi(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x * self.phi_raw(x)
        }
    }

    /// `lim_{x→0+} f_φ'(x)`, or `None` when it diverges (Shannon only).
    pub fn f_phi_prime_at_zero(&self) -> Option<f64> {
        match self.family {
            Family::Shannon => None,
            Family::Tsallis { k, q } => Some(k / (q - 1.0)),
            Family::Exp { k, q } => Some(if k == 0.0 { q - 1.0 } else { q }),
            Family::Cos { theta } => Some(1.0 - theta.cos()),
            Family::Sin { theta } => Some(theta.sin()),
        }
    }

    /// `f_φ'` on `[0, 1]` with the analytic limit at zero; errors where that
    /// limit is infinite.
    pub fn f_phi_prime_closed(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            self.f_phi_prime_at_zero()
                .ok_or_else(|| Error::Domain(format!("f_φ'(0+) is infinite for the {} family", self.family.name())))
        } else {
            self.f_phi_prime(x)
        }
    }

    pub(crate) fn phi_raw(&self, x: f64) -> f64 {
        match self.family {
            Family::Shannon => -x.ln(),
            Family::Tsallis { k, q } => k / (q - 1.0) * (1.0 - ipow(x, q - 1.0)),
            Family::Exp { k, q } => q - x.powf(k) * q.powf(x),
            Family::Cos { theta } => (theta * x).cos() - theta.cos(),
            Family::Sin { theta } => theta.sin() - (theta * x).sin(),
        }
    }

    pub(crate) fn f_prime_raw(&self, x: f64) -> f64 {
        match self.family {
            Family::Shannon => -x.ln() - 1.0,
            Family::Tsallis { k, q } => k / (q - 1.0) * (1.0 - q * ipow(x, q - 1.0)),
            Family::Exp { k, q } => q - x.powf(k) * q.powf(x) * (k + 1.0 + x * q.ln()),
            Family::Cos { theta } => (theta * x).cos() - theta.cos() - theta * x * (theta * x).sin(),
            Family::Sin { theta } => theta.sin() - (theta * x).sin() - theta * x * (theta * x).cos(),
        }
    }

    /// `f_φ''(x)`, strictly negative on `(0, 1)` for every valid spec.
    pub(crate) fn f_second_raw(&self, x: f64) -> f64 {
        match self.family {
            Family::Shannon => -1.0 / x,
            Family::Tsallis { k, q } => -k * q * ipow(x, q - 2.0),
            Family::Exp { k, q } => {
                let l = q.ln();
                if k == 0.0 {
                    -q.powf(x) * l * (2.0 + x * l)
                } else {
                    -x.powf(k - 1.0) * q.powf(x) * ((k + x * l) * (k + 1.0 + x * l) + x * l)
                }
            }
            Family::Cos { theta } => -2.0 * theta * (theta * x).sin() - theta * theta * x * (theta * x).cos(),
            Family::Sin { theta } => -2.0 * theta * (theta * x).cos() + theta * theta * x * (theta * x).sin(),
        }
    }

    /// `x² φ'(x)`, extended by its limit 0 at `x = 0`.
    pub(crate) fn x_sq_phi_prime(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let phi_prime = match self.family {
            Family::Shannon => return -x,
            Family::Tsallis { k, q } => return -k * ipow(x, q),
            Family::Exp { k, q } => {
                let l = q.ln();
                if k == 0.0 {
                    -q.powf(x) * l
                } else {
                    return -x.powf(k + 1.0) * q.powf(x) * (k + x * l);
                }
            }
            Family::Cos { theta } => -theta * (theta * x).sin(),
            Family::Sin { theta } => -theta * (theta * x).cos(),
        };
        x * x * phi_prime
    }

    /// Inverse of `f_φ'`, clamped to `[0, 1]`.
    ///
    /// Returns 0 when `y` is at or above the finite limit `f_φ'(0+)` and 1
    /// when `y ≤ f_φ'(1)`. Shannon and Tsallis use closed forms; the other
    /// families bracket the root in `[0, 1]` and refine it with
    /// bisection-safeguarded Newton steps down to `1e-12`.
    pub fn g_phi(&self, y: f64) -> Result<f64> {
        if y.is_nan() {
            return Err(Error::Domain("g_φ called with NaN".into()));
        }
        if let Some(top) = self.f_phi_prime_at_zero() {
            if y >= top {
                return Ok(0.0);
            }
        }
        if y <= self.f_prime_raw(1.0) {
            return Ok(1.0);
        }
        match self.family {
            Family::Shannon => Ok((-y - 1.0).exp()),
            Family::Tsallis { k, q } => {
                let base = (1.0 - (q - 1.0) * y / k) / q;
                Ok(base.powf(1.0 / (q - 1.0)).clamp(0.0, 1.0))
            }
            _ => self.g_phi_numeric(y),
        }
    }

    fn g_phi_numeric(&self, y: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = 0.5;
        for _ in 0..G_MAX_ITER {
            let resid = self.f_prime_raw(x) - y;
            if resid == 0.0 {
                return Ok(x);
            }
            // f' is decreasing: a positive residual means the root lies to the right.
            if resid > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= G_TOL {
                return Ok(0.5 * (lo + hi));
            }
            let slope = self.f_second_raw(x);
            let newton = x - resid / slope;
            let next = if slope < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 0.1 * G_TOL {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::NonConvergence {
            what: "g_phi inversion",
            iterations: G_MAX_ITER,
        })
    }

    /// `Ω(p) = -λ Σ_a p(a) φ(p(a))`; zero entries contribute nothing.
    pub fn omega(&self, p: &[f64]) -> Result<f64> {
        check_distribution(p)?;
        Ok(self.omega_raw(p))
    }

    pub(crate) fn omega_raw(&self, p: &[f64]) -> f64 {
        -self.lambda * p.iter().map(|&x| self.f_phi(x)).sum::<f64>()
    }

    /// `∇Ω(p)`, component `a` equal to `-λ f_φ'(p(a))`.
    pub fn grad_omega(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_distribution(p)?;
        p.iter()
            .map(|&x| self.f_phi_prime_closed(x).map(|d| -self.lambda * d))
            .collect()
    }
}

impl fmt::Display for RegularizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Shannon => write!(f, "shannon(λ={})", self.lambda),
            Family::Tsallis { k, q } => write!(f, "tsallis(λ={}, k={k}, q={q})", self.lambda),
            Family::Exp { k, q } => write!(f, "exp(λ={}, k={k}, q={q})", self.lambda),
            Family::Cos { theta } => write!(f, "cos(λ={}, θ={theta})", self.lambda),
            Family::Sin { theta } => write!(f, "sin(λ={}, θ={theta})", self.lambda),
        }
    }
}

fn check_unit(x: f64) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument must lie in (0, 1], got {x}")))
    }
}

/// Entries finite and non-negative, summing to one within [`DISTRIBUTION_TOL`].
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    if let Some((i, x)) = p.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {i} is {x}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum FamilyName {
    Shannon,
    Tsallis,
    Exp,
    Cos,
    Sin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    family: FamilyName,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp_q: Option<f64>,
}

impl TryFrom<SpecDoc> for RegularizerSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        let stray = |name: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::Parameter(format!(
                    "field `{name}` does not apply to the {:?} family",
                    doc.family
                )))
            } else {
                Ok(())
            }
        };
        let family = match doc.family {
            FamilyName::Shannon => {
                stray("k", doc.k.is_some())?;
                stray("q", doc.q.is_some())?;
                stray("theta", doc.theta.is_some())?;
                Family::Shannon
            }
            FamilyName::Tsallis => {
                stray("theta", doc.theta.is_some())?;
                Family::Tsallis {
                    k: doc.k.unwrap_or(1.0),
                    q: doc.q.unwrap_or(2.0),
                }
            }
            FamilyName::Exp => {
                stray("theta", doc.theta.is_some())?;
                Family::Exp {
                    k: doc.exp_k.or(doc.k).unwrap_or(0.0),
                    q: doc.exp_q.or(doc.q).unwrap_or(E),
                }
            }
            FamilyName::Cos => {
                stray("k", doc.k.is_some())?;
                stray("q", doc.q.is_some())?;
                Family::Cos {
                    theta: doc.theta.unwrap_or(FRAC_PI_2),
                }
            }
            FamilyName::Sin => {
                stray("k", doc.k.is_some())?;
                stray("q", doc.q.is_some())?;
                Family::Sin {
                    theta: doc.theta.unwrap_or(SIN_THETA_DEFAULT),
                }
            }
        };
        RegularizerSpec::new(family, doc.lambda)
    }
}

impl From<RegularizerSpec> for SpecDoc {
    fn from(spec: RegularizerSpec) -> Self {
        let mut doc = SpecDoc {
            family: FamilyName::Shannon,
            lambda: spec.lambda,
            k: None,
            q: None,
            theta: None,
            exp_k: None,
            exp_q: None,
        };
        match spec.family {
            Family::Shannon => {}
            Family::Tsallis { k, q } => {
                doc.family = FamilyName::Tsallis;
                doc.k = Some(k);
                doc.q = Some(q);
            }
            Family::Exp { k, q } => {
                doc.family = FamilyName::Exp;
                doc.exp_k = Some(k);
                doc.exp_q = Some(q);
            }
            Family::Cos { theta } => {
                doc.family = FamilyName::Cos;
                doc.theta = Some(theta);
            }
            Family::Sin { theta } => {
                doc.family = FamilyName::Sin;
                doc.theta = Some(theta);
            }
        }
        doc
    }
}

/// `x^e` with the small integer exponents of the common Tsallis indices
/// taken without `powf`.
fn ipow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else {
        x.powf(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<RegularizerSpec> {
        let mut v = RegularizerSpec::all_families(1.0);
        v.push(RegularizerSpec::tsallis(0.7, 0.5, 1.5).unwrap());
        v.push(RegularizerSpec::tsallis(2.0, 2.0, 3.0).unwrap());
        v.push(RegularizerSpec::exp_with(1.0, 0.5, 2.0).unwrap());
        v.push(RegularizerSpec::cos_with(1.0, 1.0).unwrap());
        v.push(RegularizerSpec::sin_with(1.0, SIN_THETA_MAX).unwrap());
        v
    }

    fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn phi_examples() {
        let sh = RegularizerSpec::shannon(1.0).unwrap();
        assert_eq!(sh.phi(1.0).unwrap(), 0.0);
        let ts = RegularizerSpec::tsallis(1.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(ts.phi(0.5).unwrap(), 0.5, epsilon = 1e-15);
        let ex = RegularizerSpec::exp(1.0).unwrap();
        assert_abs_diff_eq!(ex.phi(1.0).unwrap(), 0.0, epsilon = 1e-15);
        for spec in families() {
            assert_abs_diff_eq!(spec.phi(1.0).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn phi_rejects_out_of_domain() {
        let sh = RegularizerSpec::shannon(1.0).unwrap();
        assert!(matches!(sh.phi(0.0), Err(Error::Domain(_))));
        assert!(matches!(sh.phi(-0.1), Err(Error::Domain(_))));
        assert!(matches!(sh.f_phi_prime(1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(RegularizerSpec::shannon(0.0).is_err());
        assert!(RegularizerSpec::tsallis(1.0, 0.0, 2.0).is_err());
        assert!(RegularizerSpec::tsallis(1.0, 1.0, 1.0).is_err());
        assert!(RegularizerSpec::cos_with(1.0, 2.0).is_err());
        assert!(RegularizerSpec::sin_with(1.0, FRAC_PI_2).is_err());
        assert!(RegularizerSpec::exp_with(1.0, 0.0, 1.0).is_err());
        assert!(RegularizerSpec::exp_with(1.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn f_phi_prime_examples() {
        let sh = RegularizerSpec::shannon(1.0).unwrap();
        assert_eq!(sh.f_phi_prime(1.0).unwrap(), -1.0);
        let ts = RegularizerSpec::tsallis(1.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(ts.f_phi_prime(0.25).unwrap(), 0.5, epsilon = 1e-15);
        for spec in families() {
            let got = spec.f_phi_prime(0.3).unwrap();
            let want = fd(|x| x * spec.phi_raw(x), 0.3, 1e-6);
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn derivative_consistency_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in families() {
            for _ in 0..1000 {
                let x: f64 = rng.random_range(0.01..1.0);
                let h = 1e-6_f64.min(0.5 * (1.0 - x)).max(1e-9);
                let want = fd(|t| t * spec.phi_raw(t), x, h);
                assert!((spec.f_prime_raw(x) - want).abs() <= 1e-6, "{spec} at {x}");
                let want2 = fd(|t| spec.f_prime_raw(t), x, h);
                assert!(
                    (spec.f_second_raw(x) - want2).abs() <= 1e-5 * (1.0 + want2.abs()),
                    "{spec} f'' at {x}"
                );
                let want_sq = x * x * fd(|t| spec.phi_raw(t), x, h);
                assert!((spec.x_sq_phi_prime(x) - want_sq).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn f_prime_strictly_decreasing() {
        for spec in families() {
            let mut prev = f64::INFINITY;
            for i in 1..=1000 {
                let x = i as f64 / 1000.0;
                let v = spec.f_prime_raw(x);
                assert!(v < prev, "{spec} not decreasing at {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn f_phi_strictly_concave_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in families() {
            for _ in 0..100 {
                let mut t: Vec<f64> = (0..3).map(|_| rng.random_range(1e-3..1.0)).collect();
                t.sort_by(f64::total_cmp);
                let (x1, x2, x3) = (t[0], t[1], t[2]);
                if x3 - x1 < 1e-6 || x2 - x1 < 1e-7 || x3 - x2 < 1e-7 {
                    continue;
                }
                let w = (x3 - x2) / (x3 - x1);
                let chord = w * spec.f_phi(x1) + (1.0 - w) * spec.f_phi(x3);
                assert!(spec.f_phi(x2) > chord, "{spec} at {x1},{x2},{x3}");
            }
        }
    }

    #[test]
    fn sin_beyond_threshold_is_not_concave() {
        // θ = π/2 gives f'' > 0 at x = 1.
        let theta = FRAC_PI_2;
        let f2 = -2.0 * theta * theta.cos() + theta * theta * theta.sin();
        assert!(f2 > 0.0);
        let at_max = -2.0 * SIN_THETA_MAX * SIN_THETA_MAX.cos() + SIN_THETA_MAX * SIN_THETA_MAX * SIN_THETA_MAX.sin();
        assert_abs_diff_eq!(at_max, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn g_phi_examples() {
        let sh = RegularizerSpec::shannon(1.0).unwrap();
        assert_abs_diff_eq!(sh.g_phi(-1.0).unwrap(), 1.0, epsilon = 1e-15);
        let ts = RegularizerSpec::tsallis(1.0, 1.0, 2.0).unwrap();
        assert_eq!(ts.g_phi(1.0).unwrap(), 0.0);
        assert_eq!(ts.g_phi(5.0).unwrap(), 0.0);
        let cos = RegularizerSpec::cos(1.0).unwrap();
        let y = cos.f_phi_prime(0.4).unwrap();
        assert_abs_diff_eq!(cos.g_phi(y).unwrap(), 0.4, epsilon = 1e-10);
    }

    #[test]
    fn g_phi_inverts_f_prime() {
        for spec in families() {
            for i in 0..=990 {
                let x = 0.01 + i as f64 / 1000.0;
                let back = spec.g_phi(spec.f_prime_raw(x)).unwrap();
                assert!((back - x).abs() <= 1e-9, "{spec}: {x} -> {back}");
            }
        }
    }

    #[test]
    fn omega_examples() {
        let sh = RegularizerSpec::shannon(1.0).unwrap();
        assert_abs_diff_eq!(sh.omega(&[0.25; 4]).unwrap(), -(4.0_f64).ln(), epsilon = 1e-12);
        let ts = RegularizerSpec::tsallis(1.0, 1.0, 2.0).unwrap();
        assert_eq!(ts.omega(&[1.0, 0.0]).unwrap(), 0.0);
        for spec in families() {
            assert_abs_diff_eq!(spec.omega(&[0.0, 1.0, 0.0]).unwrap(), 0.0, epsilon = 1e-14);
        }
        assert!(matches!(sh.omega(&[0.5, 0.6]), Err(Error::InvalidDistribution(_))));
        assert!(sh.omega(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn omega_shannon_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sh = RegularizerSpec::shannon(2.5).unwrap();
        for _ in 0..100 {
            let mut p: Vec<f64> = (0..5).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            let want = 2.5 * p.iter().map(|x| x * x.ln()).sum::<f64>();
            assert_abs_diff_eq!(sh.omega(&p).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn grad_omega_examples() {
        let sh = RegularizerSpec::shannon(1.0).unwrap();
        let g = sh.grad_omega(&[0.5, 0.5]).unwrap();
        for v in g {
            assert_abs_diff_eq!(v, 1.0 - 2.0_f64.ln(), epsilon = 1e-12);
            assert_abs_diff_eq!(v, 0.306853, epsilon = 1e-6);
        }
        let ts = RegularizerSpec::tsallis(1.0, 1.0, 2.0).unwrap();
        let g = ts.grad_omega(&[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(g[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.5, epsilon = 1e-15);
        assert!(matches!(sh.grad_omega(&[0.0, 1.0]), Err(Error::Domain(_))));
        assert!(ts.grad_omega(&[0.0, 1.0]).is_ok());
    }

    #[test]
    fn grad_omega_matches_fd_along_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for spec in families() {
            for _ in 0..20 {
                let mut p: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= s);
                let grad = spec.grad_omega(&p).unwrap();
                // direction in the tangent space of the simplex
                let mut v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let m = v.iter().sum::<f64>() / 4.0;
                v.iter_mut().for_each(|x| *x -= m);
                let h = 1e-6;
                let plus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + h * b).collect();
                let minus: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a - h * b).collect();
                let fd = (spec.omega_raw(&plus) - spec.omega_raw(&minus)) / (2.0 * h);
                let an: f64 = grad.iter().zip(&v).map(|(g, d)| g * d).sum();
                assert_abs_diff_eq!(an, fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn boundary_limit_of_f_phi() {
        for spec in families() {
            assert!(spec.f_phi(1e-12).abs() < 1e-9, "{spec}");
        }
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let spec: RegularizerSpec =
            serde_json::from_str(r#"{"family":"tsallis","lambda":1.0,"k":0.5,"q":2.0}"#).unwrap();
        assert_eq!(spec, RegularizerSpec::tsallis(1.0, 0.5, 2.0).unwrap());
        let back: RegularizerSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let cos: RegularizerSpec = serde_json::from_str(r#"{"family":"cos","lambda":2.0}"#).unwrap();
        assert_eq!(cos, RegularizerSpec::cos(2.0).unwrap());
        assert!(serde_json::from_str::<RegularizerSpec>(r#"{"family":"shannon","lambda":1.0,"bogus":1}"#).is_err());
        assert!(serde_json::from_str::<RegularizerSpec>(r#"{"family":"tsallis","lambda":1.0,"q":0.5}"#).is_err());
        assert!(serde_json::from_str::<RegularizerSpec>(r#"{"family":"shannon","lambda":1.0,"q":2.0}"#).is_err());
    }
}
