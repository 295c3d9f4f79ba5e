use serde::Serialize;

use crate::control::CostSpec;
use crate::diffusion::{run_path, DiffusionModel, PathEvent};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::policy::{ControlField, Policy};
use crate::queue::{queue_scale, unscale, Engine, Observer, SystemParams, SystemState};
use crate::rng::stream;
use crate::stats::{mean_var, BatchAccumulator, Estimate, MIN_BATCHES};

/// Relative size of the neglected tail `∫_T^∞ e^{-αt} r dt`.
pub const TRUNCATION_TARGET: f64 = 1e-4;

/// What to simulate: the limit diffusion under a control field, or the
/// n-th queueing system under a scheduling policy.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Diffusion {
        model: &'a DiffusionModel,
        control: &'a ControlField,
        dt: f64,
    },
    Queue {
        params: &'a SystemParams,
        policy: &'a dyn Policy,
    },
}

impl Source<'_> {
    pub fn d(&self) -> usize {
        match self {
            Source::Diffusion { model, .. } => model.d(),
            Source::Queue { params, .. } => params.d(),
        }
    }

    fn check_x0(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.d() || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "initial state {x0:?} does not fit a {}-class source",
                self.d()
            )));
        }
        if let Source::Diffusion { dt, .. } = self {
            if !(*dt > 0.0) {
                return Err(Error::Domain(format!("time step must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    /// Runs one path on `[0, horizon]`, calling `visit(from, to, x̂, cost)`
    /// for every piece on which the scaled state and running cost are held
    /// (Euler steps for the diffusion, holding intervals for the queue).
    pub fn run(
        &self,
        x0: &[f64],
        horizon: f64,
        cost: &CostSpec,
        seed: u64,
        index: u64,
        mut visit: impl FnMut(f64, f64, &[f64], f64),
    ) -> Result<()> {
        let mut rng = stream(seed, index);
        match *self {
            Source::Diffusion { model, control, dt } => {
                run_path(model, control, x0, horizon, dt, &mut rng, |ev| {
                    if let PathEvent::Step { t, h, x, u } = ev {
                        visit(t, t + h, x, cost.eval(x, u));
                    }
                });
            }
            Source::Queue { params, policy } => {
                let engine = Engine::new(params, policy);
                let mut state = engine.build(&unscale(params, x0), &mut rng)?;
                let mut obs = Visitor {
                    params,
                    cost,
                    xhat: vec![0.0; params.d()],
                    visit: &mut visit,
                };
                engine.run(&mut state, horizon, &mut rng, &mut [&mut obs]);
            }
        }
        Ok(())
    }
}

struct Visitor<'a, F: FnMut(f64, f64, &[f64], f64)> {
    params: &'a SystemParams,
    cost: &'a CostSpec,
    xhat: Vec<f64>,
    visit: &'a mut F,
}

impl<F: FnMut(f64, f64, &[f64], f64)> Observer for Visitor<'_, F> {
    fn hold(&mut self, state: &SystemState, from: f64, to: f64) {
        let n = self.params.n as f64;
        let s = n.sqrt();
        for (i, v) in self.xhat.iter_mut().enumerate() {
            *v = (state.x[i] as f64 - n * self.params.limit.rho[i]) / s;
        }
        let r = self.cost.queue_cost(&queue_scale(self.params, &state.q));
        (self.visit)(from, to, &self.xhat, r);
    }
}

/// Replication-averaged discounted cost with its truncation data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiscountedEstimate {
    pub estimate: Estimate,
    /// Simulated horizon `T`.
    pub horizon: f64,
    /// Allowance for the neglected tail, `e^{-αT} r̄ / α` with `r̄` the
    /// mean running cost over the last quarter of `[0, T]` plus three
    /// standard errors.
    pub truncation: f64,
    pub replications: usize,
}

/// Monte Carlo estimate of `E ∫₀^∞ e^{-αt} r dt` from `x0` (scaled
/// coordinates). Replication `k` uses stream `(seed, k)`. The horizon
/// starts at `ln(10⁴)/α` and grows until the estimated tail is at most
/// 10⁻⁴ of the estimate.
pub fn estimate_discounted(
    source: &Source<'_>,
    x0: &[f64],
    alpha: f64,
    cost: &CostSpec,
    reps: usize,
    seed: u64,
) -> Result<DiscountedEstimate> {
    let base = (1.0 / TRUNCATION_TARGET).ln() / alpha.max(f64::MIN_POSITIVE);
    discounted_with_horizon(source, x0, alpha, cost, reps, seed, base, true)
}

/// [`estimate_discounted`] at a fixed horizon, without extension.
pub fn estimate_discounted_at(
    source: &Source<'_>,
    x0: &[f64],
    alpha: f64,
    cost: &CostSpec,
    reps: usize,
    seed: u64,
    horizon: f64,
) -> Result<DiscountedEstimate> {
    discounted_with_horizon(source, x0, alpha, cost, reps, seed, horizon, false)
}

#[allow(clippy::too_many_arguments)]
fn discounted_with_horizon(
    source: &Source<'_>,
    x0: &[f64],
    alpha: f64,
    cost: &CostSpec,
    reps: usize,
    seed: u64,
    mut horizon: f64,
    extend: bool,
) -> Result<DiscountedEstimate> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("discount rate must be positive, got {alpha}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    cost.validate()?;
    source.check_x0(x0)?;
    for _ in 0..6 {
        let tail_from = 0.75 * horizon;
        let runs: Vec<Result<(f64, f64)>> = par_map(reps, |k| {
            let mut total = 0.0;
            let mut tail = 0.0;
            source.run(x0, horizon, cost, seed, k as u64, |a, b, _, r| {
                if r != 0.0 {
                    total += r * ((-alpha * a).exp() - (-alpha * b).exp()) / alpha;
                    let lo = a.max(tail_from);
                    if b > lo {
                        tail += r * (b - lo);
                    }
                }
            })?;
            Ok((total, tail / (horizon - tail_from)))
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let tails: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let (tail_mean, tail_var) = mean_var(&tails);
        let tail_cost = tail_mean + 3.0 * (tail_var / reps.max(1) as f64).sqrt();
        let estimate = Estimate::from_replications(&values, MIN_BATCHES)?;
        let truncation = (-alpha * horizon).exp() * tail_cost / alpha;
        let limit = TRUNCATION_TARGET * estimate.value.abs();
        if !extend || truncation <= limit {
            return Ok(DiscountedEstimate {
                estimate,
                horizon,
                truncation,
                replications: reps,
            });
        }
        horizon += (truncation / limit).ln() / alpha + 1.0 / alpha;
        log::debug!("extending discounted horizon to {horizon}");
    }
    Err(Error::NoConvergence(
        "discounted horizon did not reach the truncation target after 6 extensions".into(),
    ))
}

/// Long-run average running cost from one path, with batch-means standard
/// error over `[burn_in, horizon)`.
pub fn estimate_ergodic(
    source: &Source<'_>,
    x0: &[f64],
    horizon: f64,
    burn_in: f64,
    batches: usize,
    cost: &CostSpec,
    seed: u64,
) -> Result<Estimate> {
    if !(horizon > burn_in && burn_in >= 0.0) {
        return Err(Error::Domain(format!(
            "horizon {horizon} must exceed burn-in {burn_in}"
        )));
    }
    cost.validate()?;
    source.check_x0(x0)?;
    let mut acc = BatchAccumulator::new(burn_in, horizon, batches);
    source.run(x0, horizon, cost, seed, 0, |a, b, _, r| acc.add(a, b, r))?;
    acc.estimate()
}

/// Stationary moments of the scaled state from one long path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationaryMoments {
    pub mean: Vec<Estimate>,
    pub variance: Vec<Estimate>,
    /// Long-run average of `|x̂|^κ` (Euclidean norm).
    pub norm_power: Estimate,
    pub kappa: f64,
}

/// Time averages of `x̂_i`, the variance of `x̂_i` and `|x̂|^κ` over
/// `[burn_in, horizon)`. Variance standard errors come from the
/// linearized batch values `m₂ - 2 m̄₁ m₁`.
pub fn stationary_moments(
    source: &Source<'_>,
    x0: &[f64],
    horizon: f64,
    burn_in: f64,
    batches: usize,
    kappa: f64,
    seed: u64,
) -> Result<StationaryMoments> {
    if !(horizon > burn_in && burn_in >= 0.0) {
        return Err(Error::Domain(format!(
            "horizon {horizon} must exceed burn-in {burn_in}"
        )));
    }
    source.check_x0(x0)?;
    let d = source.d();
    let none = CostSpec { c: 0.0, m: 1.0 };
    let mut first: Vec<BatchAccumulator> = (0..d)
        .map(|_| BatchAccumulator::new(burn_in, horizon, batches))
        .collect();
    let mut second = first.clone();
    let mut power = BatchAccumulator::new(burn_in, horizon, batches);
    source.run(x0, horizon, &none, seed, 0, |a, b, x, _| {
        for i in 0..d {
            first[i].add(a, b, x[i]);
            second[i].add(a, b, x[i] * x[i]);
        }
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        power.add(a, b, norm2.powf(0.5 * kappa));
    })?;
    let mut mean = Vec::with_capacity(d);
    let mut variance = Vec::with_capacity(d);
    for i in 0..d {
        let m1 = first[i].batch_means();
        let m2 = second[i].batch_means();
        let e1 = Estimate::from_batches(&m1, burn_in)?;
        let mbar2 = m2.iter().sum::<f64>() / m2.len() as f64;
        let lin: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| b - 2.0 * e1.value * a).collect();
        let mut ev = Estimate::from_batches(&lin, burn_in)?;
        ev.value = mbar2 - e1.value * e1.value;
        mean.push(e1);
        variance.push(ev);
    }
    Ok(StationaryMoments {
        mean,
        variance,
        norm_power: power.estimate()?,
        kappa,
    })
}
