//! WebAssembly front end: a two-class system with interruptions whose
//! queue path, limit-diffusion path and discounted value function can be
//! computed from a static page.
//!
//! Every export returns a flat `Float64Array` of fixed-width rows. The
//! plain Rust functions behind the exports are usable and tested on any
//! target.

use std::path::Path;

use wasm_bindgen::prelude::*;

use qedlab::control::{solve_discounted, CostSpec, SolverOptions};
use qedlab::diffusion::{simulate_recorded, DiffusionModel};
use qedlab::experiments::PolicySpec;
use qedlab::policy::ControlField;
use qedlab::queue::{diffusion_scale, queue_scale, unscale, Engine, HalfinWhittSpec, Phase, SnapshotRecorder};
use qedlab::renewal::RenewalSpec;
use qedlab::rng::stream;

/// Builds a Poisson-arrival system from `(λ, μ, γ)` triples and an
/// exponential environment with up rate `beta` and downtime scale `theta`.
pub fn system(rates: &[f64], beta: f64, theta: f64) -> Result<HalfinWhittSpec, String> {
    if rates.is_empty() || !rates.len().is_multiple_of(3) {
        return Err(format!(
            "expected (lambda, mu, gamma) triples, got {} numbers",
            rates.len()
        ));
    }
    let triples: Vec<(f64, f64, f64)> = rates.chunks(3).map(|c| (c[0], c[1], c[2])).collect();
    let spec = HalfinWhittSpec::poisson(&triples).with_environment(beta, theta, RenewalSpec::default());
    DiffusionModel::from_spec(&spec).map_err(|e| e.to_string())?;
    Ok(spec)
}

fn policy(name: &str) -> Result<PolicySpec, String> {
    Ok(match name {
        "modified_priority" => PolicySpec::ModifiedPriority,
        "static_priority" => PolicySpec::StaticPriority,
        "idling" => PolicySpec::Idling { fraction: 0.9 },
        other => return Err(format!("unknown policy `{other}`")),
    })
}

/// Scaled queue path of the n-th system started at the centering point.
/// Rows are `t, x̂_1..x̂_d, q̂_1..q̂_d, up` with `up` 1 or 0.
pub fn queue_path(
    spec: &HalfinWhittSpec,
    n: u64,
    policy_name: &str,
    horizon: f64,
    every: f64,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let params = spec.at(n).map_err(|e| e.to_string())?;
    let policy = policy(policy_name)?
        .build(&params, Path::new(""))
        .map_err(|e| e.to_string())?;
    let engine = Engine::new(&params, policy.as_ref());
    let mut rng = stream(seed, 0);
    let x0 = unscale(&params, &vec![0.0; params.d()]);
    let mut state = engine.build(&x0, &mut rng).map_err(|e| e.to_string())?;
    let mut rec = SnapshotRecorder::every(every, horizon);
    engine.run(&mut state, horizon, &mut rng, &mut [&mut rec]);
    let mut out = Vec::with_capacity(rec.snapshots.len() * (2 + 2 * params.d()));
    for s in &rec.snapshots {
        out.push(s.t);
        out.extend(diffusion_scale(&params, &s.x));
        out.extend(queue_scale(&params, &s.q));
        out.push(if s.phase == Phase::Up { 1.0 } else { 0.0 });
    }
    Ok(out)
}

/// Limit-diffusion path from the origin with all excess queued in the last
/// class. Rows are `t, x_1..x_d`.
pub fn diffusion_path(
    spec: &HalfinWhittSpec,
    horizon: f64,
    dt: f64,
    every: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return Err(format!("need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}"));
    }
    let model = DiffusionModel::from_spec(spec).map_err(|e| e.to_string())?;
    let d = model.d();
    let mut rng = stream(seed, 0);
    let path = simulate_recorded(
        &model,
        &ControlField::last_class(d),
        &vec![0.0; d],
        horizon,
        dt,
        every,
        &mut rng,
    );
    let mut out = Vec::with_capacity(path.len() * (d + 1));
    for k in 0..path.len() {
        out.push(path.epochs[k]);
        out.extend_from_slice(path.state(k));
    }
    Ok(out)
}

/// Discounted value function and optimal control along the first axis
/// (other coordinates zero). Rows are `x_1, V, u_1..u_d`.
pub fn value_slice(spec: &HalfinWhittSpec, alpha: f64, c: f64, m: f64, a: f64, h: f64) -> Result<Vec<f64>, String> {
    let model = DiffusionModel::from_spec(spec).map_err(|e| e.to_string())?;
    let cost = CostSpec { c, m };
    cost.validate().map_err(|e| e.to_string())?;
    if !(alpha > 0.0) {
        return Err(format!("alpha must be positive, got {alpha}"));
    }
    let options = SolverOptions {
        a,
        h,
        ..SolverOptions::default()
    };
    let sol = solve_discounted(&model, &cost, alpha, &options).map_err(|e| e.to_string())?;
    let d = model.d();
    let field = sol.control_field();
    let steps = (2.0 * a / h).round() as usize;
    let mut out = Vec::with_capacity((steps + 1) * (d + 2));
    let mut x = vec![0.0; d];
    for k in 0..=steps {
        x[0] = -a + k as f64 * h;
        out.push(x[0]);
        out.push(sol.value_at(&x));
        out.extend(field.eval(&x));
    }
    Ok(out)
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Model handle held by the page.
#[wasm_bindgen]
pub struct Demo {
    spec: HalfinWhittSpec,
}

#[wasm_bindgen]
impl Demo {
    /// `rates` holds `(λ, μ, γ)` triples, one per class.
    #[wasm_bindgen(constructor)]
    pub fn new(rates: &[f64], beta: f64, theta: f64) -> Result<Demo, JsError> {
        system(rates, beta, theta).map(|spec| Demo { spec }).map_err(js)
    }

    /// Number of classes.
    pub fn classes(&self) -> usize {
        self.spec.classes.len()
    }

    #[wasm_bindgen(js_name = queuePath)]
    pub fn queue_path(&self, n: u32, policy: &str, horizon: f64, every: f64, seed: u32) -> Result<Vec<f64>, JsError> {
        queue_path(&self.spec, n.into(), policy, horizon, every, seed.into()).map_err(js)
    }

    #[wasm_bindgen(js_name = diffusionPath)]
    pub fn diffusion_path(&self, horizon: f64, dt: f64, every: u32, seed: u32) -> Result<Vec<f64>, JsError> {
        diffusion_path(&self.spec, horizon, dt, every as usize, seed.into()).map_err(js)
    }

    #[wasm_bindgen(js_name = valueSlice)]
    pub fn value_slice(&self, alpha: f64, c: f64, m: f64, a: f64, h: f64) -> Result<Vec<f64>, JsError> {
        value_slice(&self.spec, alpha, c, m, a, h).map_err(js)
    }
}
