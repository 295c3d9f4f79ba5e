#![allow(dead_code)]
//! Independent reference computations for the integration tests.

/// Stationary law of a birth–death chain on `0..=max` with the given rates.
pub fn birth_death_stationary(max: usize, birth: impl Fn(usize) -> f64, death: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut w = vec![1.0f64; max + 1];
    for k in 1..=max {
        w[k] = w[k - 1] * birth(k - 1) / death(k);
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Poisson probabilities on `0..=max`.
pub fn poisson_pmf(mean: f64, max: usize) -> Vec<f64> {
    let mut p = vec![(-mean).exp(); max + 1];
    for k in 1..=max {
        p[k] = p[k - 1] * mean / k as f64;
    }
    p
}

/// Total variation distance over the common support (missing entries are 0).
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    0.5 * (0..n)
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Standard normal density and distribution function (series/continued
/// fraction free: composite Simpson on a wide interval).
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E[g(Y)]` for `Y ~ N(mean, sd²)` by composite Simpson over ±12 sd.
pub fn gaussian_expectation(mean: f64, sd: f64, g: impl Fn(f64) -> f64) -> f64 {
    let k = 20_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / k as f64;
    let mut s = 0.0;
    for i in 0..=k {
        let z = a + h * i as f64;
        let w = if i == 0 || i == k {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        s += w * normal_pdf(z) * g(mean + sd * z);
    }
    s * h / 3.0
}

/// Kolmogorov–Smirnov statistic of a sample against a cdf.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sample.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}
