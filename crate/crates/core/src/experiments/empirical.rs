use std::collections::BTreeMap;

use serde::Serialize;

use crate::diffusion::{generator_general, JumpMeasure, JumpQuadrature, TestFunction};
use crate::error::{Error, Result};
use crate::policy::{u_from_z, Policy};
use crate::queue::{unscale, Engine, Observer, SystemParams, SystemState};
use crate::rng::stream;
use crate::stats::Estimate;

/// Time-weighted samples of `(x̂, u)` with total mass 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MeanEmpiricalMeasure {
    pub d: usize,
    /// Row-major `x̂` of every atom.
    pub states: Vec<f64>,
    /// Row-major `u` of every atom.
    pub controls: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MeanEmpiricalMeasure {
    /// Point mass at `(x, u)`.
    pub fn point(x: &[f64], u: &[f64]) -> Self {
        MeanEmpiricalMeasure {
            d: x.len(),
            states: x.to_vec(),
            controls: u.to_vec(),
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, k: usize) -> (&[f64], &[f64], f64) {
        let d = self.d;
        (
            &self.states[k * d..(k + 1) * d],
            &self.controls[k * d..(k + 1) * d],
            self.weights[k],
        )
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ f(x, u) dζ`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64], &[f64]) -> f64) -> f64 {
        (0..self.len())
            .map(|k| {
                let (x, u, w) = self.atom(k);
                w * f(x, u)
            })
            .sum()
    }
}

/// Occupation times of the distinct `(x, z)` states over
/// `[burn_in, horizon)`, split into equal time batches.
pub struct EmpiricalRecorder<'a> {
    params: &'a SystemParams,
    burn_in: f64,
    width: f64,
    batches: Vec<BTreeMap<(Vec<u64>, Vec<u64>), f64>>,
}

impl<'a> EmpiricalRecorder<'a> {
    pub fn new(params: &'a SystemParams, burn_in: f64, horizon: f64, batches: usize) -> Self {
        let batches = batches.max(1);
        EmpiricalRecorder {
            params,
            burn_in,
            width: (horizon - burn_in) / batches as f64,
            batches: vec![BTreeMap::new(); batches],
        }
    }

    fn measure_of(&self, maps: &[&BTreeMap<(Vec<u64>, Vec<u64>), f64>]) -> Result<MeanEmpiricalMeasure> {
        let mut merged: BTreeMap<&(Vec<u64>, Vec<u64>), f64> = BTreeMap::new();
        for m in maps {
            for (k, t) in m.iter() {
                *merged.entry(k).or_insert(0.0) += t;
            }
        }
        let total: f64 = merged.values().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("empirical measure has no time after burn-in".into()));
        }
        let d = self.params.d();
        let n = self.params.n;
        let sn = self.params.sqrt_n();
        let mut out = MeanEmpiricalMeasure {
            d,
            ..Default::default()
        };
        for ((x, z), t) in merged {
            for i in 0..d {
                out.states
                    .push((x[i] as f64 - n as f64 * self.params.limit.rho[i]) / sn);
            }
            out.controls.extend(u_from_z(x, z, n)?);
            out.weights.push(t / total);
        }
        Ok(out)
    }

    /// The measure over the whole window.
    pub fn measure(&self) -> Result<MeanEmpiricalMeasure> {
        let all: Vec<_> = self.batches.iter().collect();
        self.measure_of(&all)
    }

    /// One measure per time batch.
    pub fn batch_measures(&self) -> Result<Vec<MeanEmpiricalMeasure>> {
        self.batches.iter().map(|b| self.measure_of(&[b])).collect()
    }
}

impl Observer for EmpiricalRecorder<'_> {
    fn hold(&mut self, state: &SystemState, from: f64, to: f64) {
        let mut lo = from.max(self.burn_in);
        let end = self.burn_in + self.width * self.batches.len() as f64;
        let hi = to.min(end);
        while lo < hi {
            let idx = (((lo - self.burn_in) / self.width) as usize).min(self.batches.len() - 1);
            let stop = (self.burn_in + self.width * (idx + 1) as f64).min(hi);
            if stop <= lo {
                break;
            }
            *self.batches[idx]
                .entry((state.x.clone(), state.z.clone()))
                .or_insert(0.0) += stop - lo;
            lo = stop;
        }
    }
}

/// Simulates one path from `x0` (scaled) and returns its recorder.
pub fn record_empirical_measure<'a>(
    params: &'a SystemParams,
    policy: &dyn Policy,
    x0: &[f64],
    horizon: f64,
    burn_in: f64,
    batches: usize,
    seed: u64,
) -> Result<EmpiricalRecorder<'a>> {
    if !(horizon > burn_in && burn_in >= 0.0) {
        return Err(Error::Domain(format!(
            "horizon {horizon} must exceed burn-in {burn_in}"
        )));
    }
    let engine = Engine::new(params, policy);
    let mut rng = stream(seed, 0);
    let mut state = engine.build(&unscale(params, x0), &mut rng)?;
    let mut rec = EmpiricalRecorder::new(params, burn_in, horizon, batches);
    engine.run(&mut state, horizon, &mut rng, &mut [&mut rec]);
    Ok(rec)
}

/// The n-th system's second-order generator: drift `𝒜₁`, diffusion
/// coefficients `𝒜₂` and jumps `(√n/ϑⁿ) μⁿ_i ρ_i y` with `y ~ β F_{d₁}`.
pub struct ScaledGenerator {
    pub ell: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    pub scv: Vec<f64>,
    pub sqrt_n: f64,
    pub direction: Vec<f64>,
    pub quad: JumpQuadrature,
}

impl ScaledGenerator {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let sn = params.sqrt_n();
        let (direction, quad) = match &params.environment {
            Some(env) => {
                let jm = JumpMeasure::new(env.up_rate, 1.0, env.downtime.base.clone())?;
                let dir = params
                    .classes
                    .iter()
                    .zip(&params.limit.rho)
                    .map(|(c, r)| sn * c.service_rate * r / env.downtime.theta_n)
                    .collect();
                (dir, jm.default_quadrature())
            }
            None => (vec![0.0; params.d()], JumpQuadrature::empty()),
        };
        Ok(ScaledGenerator {
            ell: params.ell_n(),
            lambda: params.classes.iter().map(|c| c.arrival_rate).collect(),
            mu: params.classes.iter().map(|c| c.service_rate).collect(),
            gamma: params.classes.iter().map(|c| c.abandonment_rate).collect(),
            rho: params.limit.rho.clone(),
            scv: params.classes.iter().map(|c| c.interarrival.scv()).collect(),
            sqrt_n: sn,
            direction,
            quad,
        })
    }

    /// `Âⁿf(x,u) + Îⁿf(x)`.
    pub fn apply(&self, f: &dyn TestFunction, x: &[f64], u: &[f64]) -> f64 {
        let d = x.len();
        let s = x.iter().sum::<f64>().max(0.0);
        let n = self.sqrt_n * self.sqrt_n;
        let mut drift = vec![0.0; d];
        let mut second = vec![0.0; d];
        for i in 0..d {
            let served = self.mu[i] * (x[i] - s * u[i]);
            let abandoning = self.gamma[i] * s * u[i];
            drift[i] = self.ell[i] - served - abandoning;
            second[i] =
                self.lambda[i] / n * self.scv[i] + self.rho[i] * self.mu[i] + (served + abandoning) / self.sqrt_n;
        }
        generator_general(f, x, &drift, &second, &self.direction, &self.quad)
    }
}

/// `∫ (Âⁿf + Îⁿf) dζ` for each test function, as a batch-means estimate
/// over the recorder's time batches.
pub fn empirical_generator_residual(
    recorder: &EmpiricalRecorder<'_>,
    test_fns: &[&dyn TestFunction],
) -> Result<Vec<Estimate>> {
    let gen = ScaledGenerator::new(recorder.params)?;
    let measures = recorder.batch_measures()?;
    test_fns
        .iter()
        .map(|f| {
            let vals: Vec<f64> = measures
                .iter()
                .map(|m| m.integrate(|x, u| gen.apply(*f, x, u)))
                .collect();
            Estimate::from_batches(&vals, recorder.burn_in)
        })
        .collect()
}
