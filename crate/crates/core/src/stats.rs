//! Point estimates with batch-means standard errors.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest batch count accepted by the estimators.
pub const MIN_BATCHES: usize = 20;

/// Two-sided normal quantile for 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

/// A Monte Carlo point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub batches: usize,
    pub burn_in: f64,
    pub ci_level: f64,
}

impl Estimate {
    /// Mean and standard error of equally weighted batch values.
    pub fn from_batches(values: &[f64], burn_in: f64) -> Result<Self> {
        if values.len() < MIN_BATCHES {
            return Err(Error::Infeasible(format!(
                "{} batches supplied, at least {MIN_BATCHES} required",
                values.len()
            )));
        }
        let (mean, var) = mean_var(values);
        Ok(Estimate {
            value: mean,
            std_error: (var / values.len() as f64).sqrt(),
            batches: values.len(),
            burn_in,
            ci_level: 0.95,
        })
    }

    /// Groups independent replication values into `batches` consecutive
    /// groups and estimates from the group means.
    pub fn from_replications(values: &[f64], batches: usize) -> Result<Self> {
        if batches < MIN_BATCHES || values.len() < batches {
            return Err(Error::Infeasible(format!(
                "{} replications cannot form {batches} batches (at least {MIN_BATCHES} needed)",
                values.len()
            )));
        }
        let per = values.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| values[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
            .collect();
        Estimate::from_batches(&means, 0.0)
    }

    pub fn half_width(&self) -> f64 {
        Z95 * self.std_error
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Sample mean and unbiased sample variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Accumulates a piecewise-constant signal into equal-width time batches
/// covering `[start, end)`.
#[derive(Clone, Debug)]
pub struct BatchAccumulator {
    start: f64,
    width: f64,
    sums: Vec<f64>,
}

impl BatchAccumulator {
    pub fn new(start: f64, end: f64, batches: usize) -> Self {
        let batches = batches.max(1);
        BatchAccumulator {
            start,
            width: (end - start) / batches as f64,
            sums: vec![0.0; batches],
        }
    }

    /// Adds `value` held constant over `[from, to)`.
    pub fn add(&mut self, from: f64, to: f64, value: f64) {
        let end = self.start + self.width * self.sums.len() as f64;
        let a = from.max(self.start);
        let b = to.min(end);
        if !(b > a) || self.width <= 0.0 {
            return;
        }
        let mut idx = (((a - self.start) / self.width) as usize).min(self.sums.len() - 1);
        let mut lo = a;
        while lo < b && idx < self.sums.len() {
            let hi = (self.start + self.width * (idx + 1) as f64).min(b);
            if hi > lo {
                self.sums[idx] += value * (hi - lo);
            }
            lo = hi;
            idx += 1;
        }
    }

    /// Adds an instantaneous sample weighted by `dt` at time `t`.
    pub fn add_point(&mut self, t: f64, dt: f64, value: f64) {
        if t < self.start || self.width <= 0.0 {
            return;
        }
        let idx = ((t - self.start) / self.width) as usize;
        if idx < self.sums.len() {
            self.sums[idx] += value * dt;
        }
    }

    /// Batch time-averages.
    pub fn batch_means(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.width).collect()
    }

    pub fn estimate(&self) -> Result<Estimate> {
        Estimate::from_batches(&self.batch_means(), self.start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_accumulator_splits_intervals() {
        let mut acc = BatchAccumulator::new(1.0, 5.0, 4);
        acc.add(0.0, 2.5, 2.0);
        acc.add(2.5, 5.0, 4.0);
        assert_eq!(acc.batch_means(), vec![2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn too_few_batches_flagged() {
        assert!(Estimate::from_batches(&[1.0; 5], 0.0).is_err());
        let e = Estimate::from_batches(&[1.0; 20], 0.0).unwrap();
        assert_eq!(e.std_error, 0.0);
    }
}
