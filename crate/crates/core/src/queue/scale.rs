use super::params::SystemParams;
use super::state::SystemState;

/// `(X - nρ)/√n`.
pub fn diffusion_scale(params: &SystemParams, x: &[u64]) -> Vec<f64> {
    let n = params.n as f64;
    x.iter()
        .zip(&params.limit.rho)
        .map(|(v, r)| (*v as f64 - n * r) / n.sqrt())
        .collect()
}

/// `Q/√n`.
pub fn queue_scale(params: &SystemParams, q: &[u64]) -> Vec<f64> {
    let s = params.sqrt_n();
    q.iter().map(|v| *v as f64 / s).collect()
}

/// `(Z - nρ)/√n`.
pub fn server_scale(params: &SystemParams, z: &[u64]) -> Vec<f64> {
    diffusion_scale(params, z)
}

/// Inverse of [`diffusion_scale`], rounded to the nearest count.
pub fn unscale(params: &SystemParams, xhat: &[f64]) -> Vec<u64> {
    let n = params.n as f64;
    xhat.iter()
        .zip(&params.limit.rho)
        .map(|(v, r)| (n * r + n.sqrt() * v).round().max(0.0) as u64)
        .collect()
}

/// `X + n μⁿ ρ R` with `R` the residual downtime.
pub fn residual_augmented(params: &SystemParams, state: &SystemState) -> Vec<f64> {
    let r = state.residual_downtime();
    let n = params.n as f64;
    state
        .x
        .iter()
        .zip(&params.classes)
        .zip(&params.limit.rho)
        .map(|((x, c), rho)| *x as f64 + n * c.service_rate * rho * r)
        .collect()
}

/// Diffusion-scaled residual-augmented state `(X̆ - nρ)/√n`.
pub fn augmented_scaled(params: &SystemParams, state: &SystemState) -> Vec<f64> {
    let n = params.n as f64;
    residual_augmented(params, state)
        .iter()
        .zip(&params.limit.rho)
        .map(|(v, r)| (v - n * r) / n.sqrt())
        .collect()
}
