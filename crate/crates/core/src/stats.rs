//! Small numerical helpers shared across modules.

use std::f64::consts::{LN_2, SQRT_2};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail of the standard normal.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `P(lo < X <= hi)` for `X ~ N(mean, sd^2)`, accurate in both tails.
pub fn normal_interval(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a >= 0.0 {
        (normal_sf(a) - normal_sf(b)).max(0.0)
    } else {
        (normal_cdf(b) - normal_cdf(a)).max(0.0)
    }
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / SQRT_2)
}

/// `-sum p log2 p` over the positive entries.
pub fn shannon_entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    -probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
        / LN_2
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unbiased sample covariance of paired samples.
pub fn covariance(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

/// Pearson correlation; `None` when either sample is constant.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (_, vx) = mean_var(&xs);
    let (_, vy) = mean_var(&ys);
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some(covariance(pairs) / (vx * vy).sqrt())
}

/// Two-sided p-value of Welch's two-sample test on the means, using the
/// normal approximation (intended for samples of hundreds or more).
pub fn welch_p_value(a: &[f64], b: &[f64]) -> f64 {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let se2 = va / a.len() as f64 + vb / b.len() as f64;
    if se2 <= 0.0 {
        return if ma == mb { 1.0 } else { 0.0 };
    }
    two_sided_p((ma - mb) / se2.sqrt())
}
