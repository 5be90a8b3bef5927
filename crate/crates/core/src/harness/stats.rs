use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided 95% Student-t quantile with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64).expect("df ≥ 1").inverse_cdf(0.975)
}

/// Sample mean and 95% half-width `t_{0.975, n−1} · s / √n`. The half-width
/// is `None` for a single sample.
pub fn mean_and_halfwidth(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(t_quantile_975(n - 1) * (var / n as f64).sqrt()))
}
