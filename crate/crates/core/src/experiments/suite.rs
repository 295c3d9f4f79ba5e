use std::path::Path;

use serde::Serialize;

use super::config::*;
use super::empirical::{empirical_generator_residual, record_empirical_measure};
use super::estimators::{estimate_discounted, estimate_ergodic, stationary_moments, DiscountedEstimate, Source};
use super::lyapunov::{drift_slope, lyapunov_drift_probe, DriftProbe};
use crate::control::{epsilon_optimal_control, solve_discounted, solve_ergodic};
use crate::diffusion::{occupation_residual, simulate, test_function_library, DiffusionModel, TestFunction};
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::policy::{markov_from_control, ControlField, StaticPriority};
use crate::queue::{downtime_scaled, Engine, HalfinWhittSpec, SnapshotRecorder};
use crate::renewal::check_identities;
use crate::rng::stream;
use crate::stats::{mean_var, Estimate};

/// One named pass/fail verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Tabular result of an experiment with its verdicts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind, header: &[&str]) -> Self {
        ExperimentReport {
            kind: kind.name().into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

/// Seed of an independent sub-experiment: SplitMix64 of `seed ^ tag`.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut z = (seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Whether `|a_k - target|` is non-increasing in `k` up to `k_se`
/// combined standard errors between neighbors.
pub fn approaches(values: &[Estimate], target: f64, target_se: f64, k_se: f64) -> bool {
    values.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let noise = (a.std_error.powi(2) + b.std_error.powi(2) + 2.0 * target_se.powi(2)).sqrt();
        (b.value - target).abs() <= (a.value - target).abs() + k_se * noise
    })
}

// ---------------------------------------------------------------- identities

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityOutcome {
    pub rows: Vec<(String, f64)>,
    pub tolerance: f64,
}

pub fn run_identity_suite(cfg: &IdentitySuiteConfig) -> Result<IdentityOutcome> {
    let grid: Vec<f64> = (0..cfg.points)
        .map(|i| cfg.max_age * i as f64 / (cfg.points - 1) as f64)
        .collect();
    let mut rows = Vec::new();
    for kind in &cfg.kinds {
        let dist = kind.build()?;
        rows.push((dist.name(), check_identities(&dist, cfg.rate, &grid)?));
    }
    Ok(IdentityOutcome {
        rows,
        tolerance: cfg.tolerance,
    })
}

impl IdentityOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(ExperimentKind::IdentitySuite, &["law", "max_residual"]);
        for (name, res) in &self.rows {
            r.row(vec![name.clone(), f(*res)]);
        }
        let worst = self.rows.iter().map(|r| r.1).fold(0.0, f64::max);
        r.checks.push(Check::new(
            "identity residuals",
            worst <= self.tolerance,
            format!("largest residual {worst:.3e}, tolerance {:.0e}", self.tolerance),
        ));
        r
    }
}

// ---------------------------------------------------------------- CP limit

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpOutcome {
    /// Pooled mean of the unit-time increments of `√n C_d`.
    pub mean_rate: f64,
    /// Pooled variance of the unit-time increments.
    pub var_rate: f64,
    pub target_mean: f64,
    pub target_var: f64,
    pub increments: usize,
    pub tolerance: f64,
}

/// Scaled cumulative downtime of the n-th environment, pooled over the
/// unit-time increments of all replications. Customers are switched off:
/// the environment evolves independently of the queue.
pub fn run_cp_limit(cfg: &CpLimitConfig, seed: u64) -> Result<CpOutcome> {
    let spec = HalfinWhittSpec::poisson(&[(1.0, 1.0, 1.0)]).with_environment(cfg.beta, cfg.theta, cfg.downtime.clone());
    let mut params = spec.at(cfg.n)?;
    params.classes[0].arrival_rate = 0.0;
    let policy = StaticPriority::by_index(params.n, 1);
    let engine = Engine::new(&params, &policy);
    let steps = cfg.horizon.floor() as usize;
    if steps == 0 {
        return Err(Error::config("cp_limit.horizon", "must be at least 1"));
    }
    let paths: Vec<Result<Vec<f64>>> = par_map(cfg.reps, |k| {
        let mut rng = stream(seed, k as u64);
        let mut state = engine.build(&[0], &mut rng)?;
        let mut rec = SnapshotRecorder::every(1.0, steps as f64);
        engine.run(&mut state, steps as f64, &mut rng, &mut [&mut rec]);
        let path = downtime_scaled(&rec.snapshots, params.n);
        Ok(path.windows(2).map(|w| w[1].1 - w[0].1).collect())
    });
    let mut incs = Vec::with_capacity(cfg.reps * steps);
    for p in paths {
        incs.extend(p?);
    }
    let (mean, var) = mean_var(&incs);
    let base = cfg.downtime.build()?;
    Ok(CpOutcome {
        mean_rate: mean,
        var_rate: var,
        target_mean: cfg.beta * base.moment(1.0)? / cfg.theta,
        target_var: cfg.beta * base.moment(2.0)? / (cfg.theta * cfg.theta),
        increments: incs.len(),
        tolerance: cfg.tolerance,
    })
}

impl CpOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(ExperimentKind::CpLimit, &["statistic", "simulated", "target"]);
        r.row(vec!["mean_rate".into(), f(self.mean_rate), f(self.target_mean)]);
        r.row(vec!["variance_rate".into(), f(self.var_rate), f(self.target_var)]);
        let em = (self.mean_rate / self.target_mean - 1.0).abs();
        let ev = (self.var_rate / self.target_var - 1.0).abs();
        r.checks.push(Check::new(
            "compound Poisson moments",
            em <= self.tolerance && ev <= self.tolerance,
            format!(
                "relative errors mean {em:.3}, variance {ev:.3}, tolerance {}",
                self.tolerance
            ),
        ));
        r
    }
}

// ---------------------------------------------------------------- scaling

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: u64,
    pub mean: Estimate,
    pub variance: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingOutcome {
    pub rows: Vec<MomentRow>,
    pub diffusion_mean: Estimate,
    pub diffusion_variance: Estimate,
    pub tolerance: f64,
}

/// Stationary mean and variance of the first coordinate of `X̂ⁿ` for each
/// `n`, next to those of the limit diffusion under `e_d`.
pub fn run_scaling(cfg: &ScalingConfig, seed: u64, base: &Path) -> Result<ScalingOutcome> {
    let model = DiffusionModel::from_spec(&cfg.system)?;
    let d = model.d();
    let control = ControlField::last_class(d);
    let x0 = vec![0.0; d];
    let src = Source::Diffusion {
        model: &model,
        control: &control,
        dt: cfg.dt,
    };
    let dm = stationary_moments(
        &src,
        &x0,
        cfg.diffusion_horizon,
        cfg.burn_in,
        cfg.batches,
        2.0,
        sub_seed(seed, 0),
    )?;
    let rows = par_map(cfg.ns.len(), |k| -> Result<MomentRow> {
        let n = cfg.ns[k];
        let params = cfg.system.at(n)?;
        let policy = cfg.policy.build(&params, base)?;
        let src = Source::Queue {
            params: &params,
            policy: policy.as_ref(),
        };
        let m = stationary_moments(&src, &x0, cfg.horizon, cfg.burn_in, cfg.batches, 2.0, sub_seed(seed, n))?;
        Ok(MomentRow {
            n,
            mean: m.mean[0],
            variance: m.variance[0],
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ScalingOutcome {
        rows,
        diffusion_mean: dm.mean[0],
        diffusion_variance: dm.variance[0],
        tolerance: cfg.tolerance,
    })
}

impl ScalingOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            ExperimentKind::Scaling,
            &["source", "n", "mean", "mean_se", "variance", "variance_se"],
        );
        for row in &self.rows {
            r.row(vec![
                "queue".into(),
                row.n.to_string(),
                f(row.mean.value),
                f(row.mean.std_error),
                f(row.variance.value),
                f(row.variance.std_error),
            ]);
        }
        let (dm, dv) = (&self.diffusion_mean, &self.diffusion_variance);
        r.row(vec![
            "diffusion".into(),
            String::new(),
            f(dm.value),
            f(dm.std_error),
            f(dv.value),
            f(dv.std_error),
        ]);
        let means: Vec<Estimate> = self.rows.iter().map(|r| r.mean).collect();
        let vars: Vec<Estimate> = self.rows.iter().map(|r| r.variance).collect();
        r.checks.push(Check::new(
            "monotone approach",
            approaches(&means, dm.value, dm.std_error, 2.0) && approaches(&vars, dv.value, dv.std_error, 2.0),
            "distance to the diffusion moments non-increasing in n up to 2 standard errors".into(),
        ));
        if let Some(last) = self.rows.last() {
            let em = (last.mean.value / dm.value - 1.0).abs();
            let ev = (last.variance.value / dv.value - 1.0).abs();
            r.checks.push(Check::new(
                "final agreement",
                em <= self.tolerance && ev <= self.tolerance,
                format!("n = {}: relative errors mean {em:.4}, variance {ev:.4}", last.n),
            ));
        }
        r
    }
}

// ---------------------------------------------------------------- discounted

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub n: u64,
    pub estimate: Estimate,
    /// `|estimate - reference| / reference`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscountedOutcome {
    pub value: f64,
    pub solver_residual: f64,
    pub diffusion: DiscountedEstimate,
    pub rows: Vec<GapRow>,
    pub horizons: Vec<f64>,
    pub tolerance: f64,
    pub pde_tolerance: f64,
}

/// Solves the discounted problem, checks `V_α(x0)` against diffusion Monte
/// Carlo under the computed control, then estimates `Ĵ_α` of the queue
/// under the induced Markov policy for each `n`.
pub fn run_discounted_gap(cfg: &DiscountedGapConfig, seed: u64) -> Result<DiscountedOutcome> {
    let model = DiffusionModel::from_spec(&cfg.system)?;
    let d = model.d();
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    let sol = solve_discounted(&model, &cfg.cost, cfg.alpha, &cfg.solver)?;
    let value = sol.value_at(&x0);
    let control = sol.control_field();
    let src = Source::Diffusion {
        model: &model,
        control: &control,
        dt: cfg.dt,
    };
    let diffusion = estimate_discounted(&src, &x0, cfg.alpha, &cfg.cost, cfg.diffusion_reps, sub_seed(seed, 0))?;
    let mut rows = Vec::new();
    let mut horizons = Vec::new();
    for &n in &cfg.ns {
        let params = cfg.system.at(n)?;
        let policy = markov_from_control(control.clone(), &params);
        let src = Source::Queue {
            params: &params,
            policy: &policy,
        };
        let e = estimate_discounted(&src, &x0, cfg.alpha, &cfg.cost, cfg.reps, sub_seed(seed, n))?;
        horizons.push(e.horizon);
        rows.push(GapRow {
            n,
            estimate: e.estimate,
            gap: (e.estimate.value - value).abs() / value,
        });
    }
    Ok(DiscountedOutcome {
        value,
        solver_residual: sol.residual,
        diffusion,
        rows,
        horizons,
        tolerance: cfg.tolerance,
        pde_tolerance: cfg.pde_tolerance,
    })
}

fn gap_checks(r: &mut ExperimentReport, rows: &[GapRow], reference: f64, tolerance: f64) {
    let est: Vec<Estimate> = rows.iter().map(|g| g.estimate).collect();
    r.checks.push(Check::new(
        "gap decreasing in n",
        approaches(&est, reference, 0.0, 2.0),
        "gap non-increasing in n up to 2 standard errors".into(),
    ));
    if let Some(last) = rows.last() {
        r.checks.push(Check::new(
            "final gap",
            last.gap <= tolerance,
            format!("n = {}: relative gap {:.4}, tolerance {tolerance}", last.n, last.gap),
        ));
    }
}

impl DiscountedOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            ExperimentKind::DiscountedGap,
            &["source", "n", "estimate", "std_error", "relative_gap"],
        );
        r.row(vec![
            "solver".into(),
            String::new(),
            f(self.value),
            "0".into(),
            "0".into(),
        ]);
        let de = &self.diffusion.estimate;
        let dgap = (de.value - self.value).abs() / self.value;
        r.row(vec![
            "diffusion".into(),
            String::new(),
            f(de.value),
            f(de.std_error),
            f(dgap),
        ]);
        for g in &self.rows {
            r.row(vec![
                "queue".into(),
                g.n.to_string(),
                f(g.estimate.value),
                f(g.estimate.std_error),
                f(g.gap),
            ]);
        }
        r.checks.push(Check::new(
            "solver against diffusion Monte Carlo",
            dgap <= self.pde_tolerance,
            format!("relative difference {dgap:.4}, tolerance {}", self.pde_tolerance),
        ));
        gap_checks(&mut r, &self.rows, self.value, self.tolerance);
        r
    }
}

// ---------------------------------------------------------------- ergodic

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicOutcome {
    pub rho: f64,
    pub converged: bool,
    pub rows: Vec<GapRow>,
    pub tolerance: f64,
}

/// Solves the ergodic problem, shapes the control inside `radius`, and
/// estimates the long-run average queue cost under the induced policy.
pub fn run_ergodic_gap(cfg: &ErgodicGapConfig, seed: u64) -> Result<ErgodicOutcome> {
    let model = DiffusionModel::from_spec(&cfg.system)?;
    let d = model.d();
    let sol = solve_ergodic(&model, &cfg.cost, &cfg.solver)?;
    let rho = sol
        .rho
        .ok_or_else(|| Error::NoConvergence("ergodic solver returned no value".into()))?;
    let field = epsilon_optimal_control(&sol.control_grid(), cfg.radius)?;
    let x0 = vec![0.0; d];
    let rows = par_map(cfg.ns.len(), |k| -> Result<GapRow> {
        let n = cfg.ns[k];
        let params = cfg.system.at(n)?;
        let policy = markov_from_control(field.clone(), &params);
        let src = Source::Queue {
            params: &params,
            policy: &policy,
        };
        let e = estimate_ergodic(
            &src,
            &x0,
            cfg.horizon,
            cfg.burn_in,
            cfg.batches,
            &cfg.cost,
            sub_seed(seed, n),
        )?;
        Ok(GapRow {
            n,
            estimate: e,
            gap: (e.value - rho).abs() / rho,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ErgodicOutcome {
        rho,
        converged: sol.converged,
        rows,
        tolerance: cfg.tolerance,
    })
}

impl ErgodicOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            ExperimentKind::ErgodicGap,
            &["source", "n", "estimate", "std_error", "relative_gap"],
        );
        r.row(vec![
            "solver".into(),
            String::new(),
            f(self.rho),
            "0".into(),
            "0".into(),
        ]);
        for g in &self.rows {
            r.row(vec![
                "queue".into(),
                g.n.to_string(),
                f(g.estimate.value),
                f(g.estimate.std_error),
                f(g.gap),
            ]);
        }
        if !self.converged {
            r.notes
                .push("vanishing-discount sequence stopped before its tolerance".into());
        }
        gap_checks(&mut r, &self.rows, self.rho, self.tolerance);
        r
    }
}

// ---------------------------------------------------------------- moments

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentOutcome {
    pub kappa: f64,
    pub rows: Vec<(u64, Estimate)>,
    pub max_ratio: f64,
}

/// Long-run average of `|X̂ⁿ|^κ` for each `n`.
pub fn run_moment_bound(cfg: &MomentBoundConfig, seed: u64, base: &Path) -> Result<MomentOutcome> {
    let d = cfg.system.d();
    let x0 = vec![0.0; d];
    let rows = par_map(cfg.ns.len(), |k| -> Result<(u64, Estimate)> {
        let n = cfg.ns[k];
        let params = cfg.system.at(n)?;
        let policy = cfg.policy.build(&params, base)?;
        let src = Source::Queue {
            params: &params,
            policy: policy.as_ref(),
        };
        let m = stationary_moments(
            &src,
            &x0,
            cfg.horizon,
            cfg.burn_in,
            cfg.batches,
            cfg.kappa,
            sub_seed(seed, n),
        )?;
        Ok((n, m.norm_power))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(MomentOutcome {
        kappa: cfg.kappa,
        rows,
        max_ratio: cfg.max_ratio,
    })
}

impl MomentOutcome {
    /// Largest over smallest estimate.
    pub fn ratio(&self) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.1.value).collect();
        v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min)
    }

    /// Least-squares slope of `ln(estimate)` against `ln(n)`.
    pub fn growth_exponent(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|(n, e)| ((*n as f64).ln(), e.value.ln()))
            .collect();
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    }

    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(ExperimentKind::MomentBound, &["n", "kappa", "estimate", "std_error"]);
        for (n, e) in &self.rows {
            r.row(vec![n.to_string(), f(self.kappa), f(e.value), f(e.std_error)]);
        }
        let ratio = self.ratio();
        let slope = self.growth_exponent();
        r.checks.push(Check::new(
            "uniform moment bound",
            ratio <= self.max_ratio && slope < 0.1,
            format!(
                "max/min {ratio:.3} (limit {}), log-log slope in n {slope:.3}",
                self.max_ratio
            ),
        ));
        r.notes
            .push("finite-n surrogate of a uniform bound whose constants are not constructive".into());
        r
    }
}

// ---------------------------------------------------------------- Lyapunov

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovOutcome {
    pub probes: Vec<DriftProbe>,
    pub delta: f64,
    pub slope: f64,
}

pub fn run_lyapunov(cfg: &LyapunovConfig, seed: u64, base: &Path) -> Result<LyapunovOutcome> {
    let params = cfg.system.at(cfg.n)?;
    let policy = cfg.policy.build(&params, base)?;
    let mu_max = params.classes.iter().map(|c| c.service_rate).fold(0.0, f64::max);
    let delta = cfg.delta.unwrap_or(0.01 / mu_max);
    let probes = lyapunov_drift_probe(
        &params,
        policy.as_ref(),
        &cfg.function,
        &cfg.probes,
        delta,
        cfg.reps,
        seed,
    )?;
    let mut sorted = probes.clone();
    sorted.sort_by(|a, b| a.norm.total_cmp(&b.norm));
    let top = &sorted[sorted.len().saturating_sub(3)..];
    let slope = if top.len() >= 2 { drift_slope(top) } else { f64::NAN };
    Ok(LyapunovOutcome { probes, delta, slope })
}

impl LyapunovOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            ExperimentKind::Lyapunov,
            &["probe", "norm", "coercive", "drift", "std_error"],
        );
        for p in &self.probes {
            let probe = p.x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            r.row(vec![
                probe,
                f(p.norm),
                f(p.coercive),
                f(p.drift.value),
                f(p.drift.std_error),
            ]);
        }
        r.notes.push(format!("probe step {}", self.delta));
        let negative = self
            .probes
            .iter()
            .all(|p| p.drift.value + 3.0 * p.drift.std_error < 0.0);
        r.checks.push(Check::new(
            "negative drift at every probe",
            negative,
            "upper end of each 3-standard-error band below zero".into(),
        ));
        r.checks.push(Check::new(
            "drift slope at the largest probes",
            self.slope < 0.0,
            format!("slope {:.4}", self.slope),
        ));
        r
    }
}

// ---------------------------------------------------------------- occupation

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupationOutcome {
    pub names: Vec<String>,
    /// Time average of `𝒜f` along the diffusion under `e_d`.
    pub diffusion: Vec<Estimate>,
    /// `∫(Âⁿf + Îⁿf)dζ̂` per `n`.
    pub queue: Vec<(u64, Vec<Estimate>)>,
}

impl OccupationOutcome {
    /// Root mean square of the queue residuals of system `k`.
    pub fn queue_rms(&self, k: usize) -> f64 {
        let v = &self.queue[k].1;
        (v.iter().map(|e| e.value * e.value).sum::<f64>() / v.len() as f64).sqrt()
    }

    /// Root mean square of the queue residuals of each system, every test
    /// function divided by its standard error averaged over all systems.
    /// The weights are common to all `n`, so the magnitudes are comparable.
    pub fn queue_magnitudes(&self) -> Vec<f64> {
        let m = self.names.len();
        let scale: Vec<f64> = (0..m)
            .map(|j| self.queue.iter().map(|q| q.1[j].std_error).sum::<f64>() / self.queue.len() as f64)
            .collect();
        self.queue
            .iter()
            .map(|(_, ests)| {
                let ss: f64 = ests.iter().zip(&scale).map(|(e, s)| (e.value / s).powi(2)).sum();
                (ss / m as f64).sqrt()
            })
            .collect()
    }
}

pub fn run_occupation(cfg: &OccupationConfig, seed: u64, base: &Path) -> Result<OccupationOutcome> {
    let model = DiffusionModel::from_spec(&cfg.system)?;
    let d = model.d();
    let control = ControlField::last_class(d);
    let lib = test_function_library(d);
    let fns: Vec<&dyn TestFunction> = lib.iter().map(|f| f as &dyn TestFunction).collect();
    let names = fns.iter().map(|f| f.name()).collect();
    let mut rng = stream(sub_seed(seed, 0), 0);
    let path = simulate(&model, &control, &vec![0.0; d], cfg.horizon, cfg.dt, &mut rng);
    let quad = model.quadrature();
    let diffusion = occupation_residual(&path, &control, &fns, &model, &quad, cfg.burn_in, cfg.batches)?;
    drop(path);
    let mut queue = Vec::new();
    for &n in &cfg.ns {
        let params = cfg.system.at(n)?;
        let policy = cfg.policy.build(&params, base)?;
        let rec = record_empirical_measure(
            &params,
            policy.as_ref(),
            &vec![0.0; d],
            cfg.queue_horizon,
            cfg.queue_burn_in,
            cfg.batches,
            sub_seed(seed, n),
        )?;
        queue.push((n, empirical_generator_residual(&rec, &fns)?));
    }
    Ok(OccupationOutcome {
        names,
        diffusion,
        queue,
    })
}

impl OccupationOutcome {
    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new(
            ExperimentKind::Occupation,
            &["source", "n", "function", "residual", "std_error"],
        );
        for (name, e) in self.names.iter().zip(&self.diffusion) {
            r.row(vec![
                "diffusion".into(),
                String::new(),
                name.clone(),
                f(e.value),
                f(e.std_error),
            ]);
        }
        for (n, ests) in &self.queue {
            for (name, e) in self.names.iter().zip(ests) {
                r.row(vec![
                    "queue".into(),
                    n.to_string(),
                    name.clone(),
                    f(e.value),
                    f(e.std_error),
                ]);
            }
        }
        let inside = self.diffusion.iter().all(|e| e.within(0.0, 3.0));
        r.checks.push(Check::new(
            "diffusion residuals within 3 standard errors",
            inside,
            String::new(),
        ));
        if self.queue.len() >= 2 {
            let rms: Vec<f64> = (0..self.queue.len()).map(|k| self.queue_rms(k)).collect();
            let mags = self.queue_magnitudes();
            r.checks.push(Check::new(
                "queue residual decreasing in n",
                mags.windows(2).all(|w| w[1] < w[0]),
                format!("weighted magnitudes {mags:?}, plain root mean squares {rms:?}"),
            ));
        }
        r
    }
}

// ---------------------------------------------------------------- driver

/// Runs the configured experiment. Relative file references resolve
/// against `base`.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentReport> {
    cfg.validate(base)?;
    let seed = cfg.seed;
    let report = match cfg.kind {
        ExperimentKind::IdentitySuite => run_identity_suite(&cfg.identity_suite.clone().unwrap_or_default())?.report(),
        ExperimentKind::CpLimit => run_cp_limit(cfg.cp_limit.as_ref().expect("validated"), seed)?.report(),
        ExperimentKind::Scaling => run_scaling(cfg.scaling.as_ref().expect("validated"), seed, base)?.report(),
        ExperimentKind::DiscountedGap => {
            run_discounted_gap(cfg.discounted_gap.as_ref().expect("validated"), seed)?.report()
        }
        ExperimentKind::ErgodicGap => run_ergodic_gap(cfg.ergodic_gap.as_ref().expect("validated"), seed)?.report(),
        ExperimentKind::MomentBound => {
            run_moment_bound(cfg.moment_bound.as_ref().expect("validated"), seed, base)?.report()
        }
        ExperimentKind::Lyapunov => run_lyapunov(cfg.lyapunov.as_ref().expect("validated"), seed, base)?.report(),
        ExperimentKind::Occupation => run_occupation(cfg.occupation.as_ref().expect("validated"), seed, base)?.report(),
    };
    Ok(report)
}

/// Metadata written next to the CSV table.
#[derive(Clone, Debug, Serialize)]
pub struct ReportMetadata<'a> {
    pub schema_version: u32,
    pub kind: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub library_version: &'static str,
    pub config: &'a ExperimentConfig,
    pub checks: &'a [Check],
    pub notes: &'a [String],
    pub passed: bool,
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`; returns both paths.
pub fn write_report(
    report: &ExperimentReport,
    cfg: &ExperimentConfig,
    config_text: &str,
    dir: &Path,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let stem = cfg.stem();
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    crate::io::write_csv_rows(
        std::fs::File::create(&csv_path)?,
        &report.header,
        report.rows.iter().cloned(),
    )?;
    let meta = ReportMetadata {
        schema_version: cfg.schema_version,
        kind: &report.kind,
        seed: cfg.seed,
        config_hash: content_hash(config_text),
        library_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        checks: &report.checks,
        notes: &report.notes,
        passed: report.passed(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&json_path, text + "\n")?;
    Ok((csv_path, json_path))
}
