use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::par_map;
use crate::policy::Policy;
use crate::queue::{augmented_scaled, unscale, Engine, Phase, SystemParams, SystemState};
use crate::renewal::{eta, upalpha};
use crate::rng::stream;
use crate::stats::{mean_var, Estimate};

/// Lyapunov function of the augmented state `(x̃, h, ψ, k)` built from
/// `𝒱(x) = Σ ξ_i |x_i|^κ`, with corrections for arrival ages and for the
/// environment phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    pub kappa: u32,
    pub xi: Vec<f64>,
}

impl LyapunovSpec {
    pub fn new(kappa: u32, xi: Vec<f64>) -> Result<Self> {
        let spec = LyapunovSpec { kappa, xi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa < 2 || !self.kappa.is_multiple_of(2) {
            return Err(Error::config(
                "lyapunov.kappa",
                format!("must be an even integer ≥ 2, got {}", self.kappa),
            ));
        }
        if self.xi.is_empty() || self.xi.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config(
                "lyapunov.xi",
                "weights must be finite and strictly positive",
            ));
        }
        Ok(())
    }

    fn power(&self, v: f64, k: u32) -> f64 {
        v.abs().powi(k as i32)
    }

    /// `Σ ξ_i |x_i|^κ`.
    pub fn base(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.xi)
            .map(|(v, w)| w * self.power(*v, self.kappa))
            .sum()
    }

    /// Per-class piece: `-|x_i|^κ`, except that a class without abandonment
    /// switches to `-θ_i |x_i|^{κ-1}` at and above its threshold `θ_i`.
    pub fn piece(&self, v: f64, threshold: Option<f64>) -> f64 {
        match threshold {
            Some(th) if v >= th => -th * self.power(v, self.kappa - 1),
            _ => -self.power(v, self.kappa),
        }
    }

    /// Value at the scaled augmented state `x`, arrival ages `h`, phase
    /// and downtime age `k`.
    pub fn value(&self, params: &SystemParams, x: &[f64], h: &[f64], phase: Phase, k: f64) -> Result<f64> {
        let d = params.d();
        if x.len() != d || h.len() != d || self.xi.len() != d {
            return Err(Error::Domain(format!("Lyapunov function needs {d} coordinates")));
        }
        let step = 1.0 / params.sqrt_n();
        let base = self.base(x);
        let thresholds = thresholds(params);
        let mut etas = Vec::with_capacity(d);
        for (c, hi) in params.classes.iter().zip(h) {
            etas.push(eta(&c.interarrival, c.arrival_rate, *hi)?);
        }
        let mut shifted = x.to_vec();
        let mut v = base;
        for i in 0..d {
            if etas[i] != 0.0 {
                shifted[i] += step;
                v += etas[i] * (self.base(&shifted) - base);
                shifted[i] = x[i];
            }
        }
        if let Some(env) = &params.environment {
            let psi = if phase == Phase::Up { 1.0 } else { 0.0 };
            let up_k = if phase == Phase::Up { 0.0 } else { k };
            let weight = (psi + upalpha(&env.downtime, up_k)?) / env.downtime.theta_n;
            if weight != 0.0 {
                let mut sum = 0.0;
                for i in 0..d {
                    let p = self.piece(x[i], thresholds[i]);
                    let p_next = self.piece(x[i] + step, thresholds[i]);
                    sum += params.classes[i].service_rate * self.xi[i] * (p + etas[i] * (p_next - p));
                }
                v += weight * sum;
            }
        }
        Ok(v)
    }

    /// Value at a simulated state.
    pub fn value_at(&self, params: &SystemParams, state: &SystemState) -> Result<f64> {
        let x = augmented_scaled(params, state);
        self.value(params, &x, &state.ages(), state.phase, state.downtime_age())
    }
}

/// Thresholds `√n ρ_i Σ_{j∉I₀} ρ_j / Σ_{j∈I₀} ρ_j` of the classes without
/// abandonment (`I₀`), `None` for the others.
pub fn thresholds(params: &SystemParams) -> Vec<Option<f64>> {
    let rho = &params.limit.rho;
    let gamma = &params.limit.gamma;
    let zero: f64 = (0..rho.len()).filter(|&j| gamma[j] == 0.0).map(|j| rho[j]).sum();
    let rest: f64 = (0..rho.len()).filter(|&j| gamma[j] != 0.0).map(|j| rho[j]).sum();
    (0..rho.len())
        .map(|i| (gamma[i] == 0.0).then(|| params.sqrt_n() * rho[i] * rest / zero))
        .collect()
}

/// Classes without abandonment whose scaled state is at or above their
/// threshold.
pub fn saturated_classes(params: &SystemParams, x: &[f64]) -> Vec<usize> {
    thresholds(params)
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.filter(|th| x[i] >= *th).map(|_| i))
        .collect()
}

/// Drift estimate at one probe state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftProbe {
    /// Requested scaled state.
    pub x: Vec<f64>,
    pub norm: f64,
    /// `Σ ξ_i |x_i|^{κ-1}` at the probe.
    pub coercive: f64,
    pub drift: Estimate,
}

/// Estimates `(E[Ṽ(Ξ(Δ))] - Ṽ(Ξ(0)))/Δ` by `reps` replications from each
/// probe state (phase up, zero ages). Probe `p`, replication `k` uses
/// stream `(seed, p·reps + k)`.
pub fn lyapunov_drift_probe(
    params: &SystemParams,
    policy: &dyn Policy,
    spec: &LyapunovSpec,
    probes: &[Vec<f64>],
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<DriftProbe>> {
    spec.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("probe step must be positive, got {delta}")));
    }
    let engine = Engine::new(params, policy);
    let mut out = Vec::with_capacity(probes.len());
    for (p, x) in probes.iter().enumerate() {
        let counts = unscale(params, x);
        let diffs: Vec<Result<f64>> = par_map(reps, |k| {
            let mut rng = stream(seed, (p * reps + k) as u64);
            let mut state = engine.build(&counts, &mut rng)?;
            let v0 = spec.value_at(params, &state)?;
            engine.run(&mut state, delta, &mut rng, &mut []);
            Ok((spec.value_at(params, &state)? - v0) / delta)
        });
        let diffs = diffs.into_iter().collect::<Result<Vec<_>>>()?;
        let (mean, var) = mean_var(&diffs);
        let drift = Estimate {
            value: mean,
            std_error: (var / reps as f64).sqrt(),
            batches: reps,
            burn_in: 0.0,
            ci_level: 0.95,
        };
        out.push(DriftProbe {
            x: x.clone(),
            norm: x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            coercive: x
                .iter()
                .zip(&spec.xi)
                .map(|(v, w)| w * v.abs().powi(spec.kappa as i32 - 1))
                .sum(),
            drift,
        });
    }
    Ok(out)
}

/// Least-squares slope of drift against `Σ ξ|x|^{κ-1}` over the probes.
pub fn drift_slope(probes: &[DriftProbe]) -> f64 {
    let n = probes.len() as f64;
    let mx = probes.iter().map(|p| p.coercive).sum::<f64>() / n;
    let my = probes.iter().map(|p| p.drift.value).sum::<f64>() / n;
    let sxy: f64 = probes.iter().map(|p| (p.coercive - mx) * (p.drift.value - my)).sum();
    let sxx: f64 = probes.iter().map(|p| (p.coercive - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::HalfinWhittSpec;
    use crate::renewal::RenewalSpec;

    #[test]
    fn rejects_odd_or_small_exponents() {
        assert!(LyapunovSpec::new(3, vec![1.0]).is_err());
        assert!(LyapunovSpec::new(0, vec![1.0]).is_err());
        assert!(LyapunovSpec::new(2, vec![0.0]).is_err());
        assert!(LyapunovSpec::new(4, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn poisson_without_interruptions_is_the_base_function() {
        let p = HalfinWhittSpec::poisson(&[(0.5, 1.0, 1.0), (0.5, 1.0, 0.5)])
            .at(100)
            .unwrap();
        let spec = LyapunovSpec::new(2, vec![1.0, 3.0]).unwrap();
        let v = spec.value(&p, &[1.5, -2.0], &[0.3, 0.7], Phase::Up, 0.0).unwrap();
        assert!((v - (2.25 + 12.0)).abs() < 1e-12);
    }

    #[test]
    fn up_phase_adds_weighted_pieces() {
        let spec_hw = HalfinWhittSpec::poisson(&[(0.5, 1.0, 0.0), (1.0, 2.0, 1.0)]).with_environment(
            0.5,
            2.0,
            RenewalSpec::default(),
        );
        let p = spec_hw.at(100).unwrap();
        let spec = LyapunovSpec::new(2, vec![1.0, 1.0]).unwrap();
        // ρ = (0.5, 0.5): threshold √100·0.5·0.5/0.5 = 5.
        let th = thresholds(&p);
        assert!((th[0].unwrap() - 5.0).abs() < 1e-12);
        assert!(th[1].is_none());
        let x = [1.0, -2.0];
        let v = spec.value(&p, &x, &[0.0, 0.0], Phase::Up, 0.0).unwrap();
        let theta_n = 2.0 * 10.0;
        let expect = 5.0 + (-1.0 + 2.0 * -4.0) / theta_n;
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        // Exponential downtimes have a memoryless residual, so the down
        // phase carries no correction.
        let down = spec.value(&p, &x, &[0.0, 0.0], Phase::Down, 0.3).unwrap();
        assert!((down - 5.0).abs() < 1e-12);
        let big = [th[0].unwrap() + 1.0, 0.0];
        assert_eq!(saturated_classes(&p, &big), vec![0]);
        assert!(saturated_classes(&p, &x).is_empty());
    }
}
