use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::queue::{HalfinWhittSpec, LimitData};
use crate::renewal::RenewalDist;

/// Compound-Poisson driver of the limit: epochs at rate `β`, scalar sizes
/// `s = d₁/θ`.
#[derive(Clone, Debug)]
pub struct JumpMeasure {
    pub beta: f64,
    pub theta: f64,
    pub base: RenewalDist,
}

impl JumpMeasure {
    pub fn new(beta: f64, theta: f64, base: RenewalDist) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) || !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::config(
                "environment",
                format!(
                    "jump rate must be finite and nonnegative and theta positive, got beta = {beta}, theta = {theta}"
                ),
            ));
        }
        Ok(JumpMeasure { beta, theta, base })
    }

    /// `E[s^k]`.
    pub fn moment(&self, k: f64) -> Result<f64> {
        Ok(self.base.moment(k)? / self.theta.powf(k))
    }

    /// `P(s > size)`.
    pub fn tail_mass(&self, size: f64) -> f64 {
        self.base.survival(self.theta * size)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base.sample(rng) / self.theta
    }

    /// Requires a finite moment of order `m + 1`.
    pub fn check_moments(&self, m: f64) -> Result<()> {
        let order = m + 1.0;
        let v = self.moment(order)?;
        if !v.is_finite() {
            return Err(Error::config(
                "environment.downtime",
                format!("downtime law lacks the moment of order {order} required by cost exponent {m}"),
            ));
        }
        Ok(())
    }

    /// Smallest size beyond which the tail mass is at most `tail`.
    pub fn truncation(&self, tail: f64) -> f64 {
        let target = tail.ln();
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.base.log_survival(hi) > target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e9 {
                break;
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.base.log_survival(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi / self.theta
    }

    /// Composite Gauss–Legendre rule for `∫ g(s) β F(θ ds)` truncated where
    /// the tail mass drops below `tail`.
    pub fn quadrature(&self, tail: f64, panels: usize, order: usize) -> JumpQuadrature {
        let smax = self.truncation(tail);
        let (x, w) = gauss_legendre(order);
        let width = smax / panels as f64;
        let mut sizes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                let s = a + 0.5 * width * (xi + 1.0);
                sizes.push(s);
                weights.push(self.beta * 0.5 * width * wi * self.theta * self.base.density(self.theta * s));
            }
        }
        JumpQuadrature { sizes, weights, tail }
    }

    /// Default rule: tail mass 1e-12, 24 panels of 8 points.
    pub fn default_quadrature(&self) -> JumpQuadrature {
        self.quadrature(1e-12, 24, 8)
    }
}

/// Nodes and weights of a jump-size quadrature; weights include the rate.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpQuadrature {
    pub sizes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Neglected tail mass.
    pub tail: f64,
}

impl JumpQuadrature {
    pub fn empty() -> Self {
        JumpQuadrature {
            sizes: Vec::new(),
            weights: Vec::new(),
            tail: 0.0,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Drift, diffusion and jump data of the controlled limit
/// `dX = b(X,U)dt + Σ dW + λ dL`.
#[derive(Clone, Debug)]
pub struct DiffusionModel {
    pub ell: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Jump direction, equal to the limit arrival rates.
    pub lambda: Vec<f64>,
    /// Diagonal of `Σ`: `√(λ_i(1 + c²_i))`.
    pub sigma: Vec<f64>,
    pub jumps: Option<JumpMeasure>,
}

/// Echo of the model for result metadata.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub ell: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: f64,
    pub theta: f64,
    pub jump_law: Option<String>,
}

impl DiffusionModel {
    pub fn new(
        ell: Vec<f64>,
        mu: Vec<f64>,
        gamma: Vec<f64>,
        lambda: Vec<f64>,
        scv: &[f64],
        jumps: Option<JumpMeasure>,
    ) -> Result<Self> {
        let d = ell.len();
        if [mu.len(), gamma.len(), lambda.len(), scv.len()].iter().any(|&l| l != d) || d == 0 {
            return Err(Error::Validation(vec![
                "model vectors must share one positive length".into()
            ]));
        }
        let sigma: Vec<f64> = lambda.iter().zip(scv).map(|(l, c)| (l * (1.0 + c)).sqrt()).collect();
        if sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Validation(vec![
                "diffusion coefficients must be nonnegative".into()
            ]));
        }
        Ok(DiffusionModel {
            ell,
            mu,
            gamma,
            lambda,
            sigma,
            jumps,
        })
    }

    /// Limit model of a Halfin–Whitt family.
    pub fn from_spec(spec: &HalfinWhittSpec) -> Result<Self> {
        let limit = spec.limit_data()?;
        let base = match &spec.environment {
            Some(e) => Some(e.downtime.build()?),
            None => None,
        };
        Self::from_limit(&limit, base)
    }

    pub fn from_limit(limit: &LimitData, downtime: Option<RenewalDist>) -> Result<Self> {
        let jumps = match downtime {
            Some(base) if limit.beta != 0.0 => Some(JumpMeasure::new(limit.beta, limit.theta, base)?),
            _ => None,
        };
        Self::new(
            limit.ell.clone(),
            limit.mu.clone(),
            limit.gamma.clone(),
            limit.lambda.clone(),
            &limit.scv,
            jumps,
        )
    }

    pub fn d(&self) -> usize {
        self.ell.len()
    }

    pub fn beta(&self) -> f64 {
        self.jumps.as_ref().map(|j| j.beta).unwrap_or(0.0)
    }

    /// Default Euler step `10⁻³ / max(μ_i, γ_i)`.
    pub fn default_dt(&self) -> f64 {
        let top = self.mu.iter().chain(&self.gamma).cloned().fold(0.0, f64::max);
        1e-3 / top
    }

    /// `b(x,u) = ℓ - M(x - ⟨e,x⟩⁺u) - ⟨e,x⟩⁺Γu`, rejecting `u` off the
    /// simplex by more than 1e-9.
    pub fn drift(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        crate::policy::check_simplex(u, 1e-9)?;
        let mut b = vec![0.0; self.d()];
        self.drift_into(x, u, &mut b);
        Ok(b)
    }

    /// Unchecked drift evaluation.
    pub fn drift_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let s = x.iter().sum::<f64>().max(0.0);
        for i in 0..self.d() {
            out[i] = self.ell[i] - self.mu[i] * x[i] + (self.mu[i] - self.gamma[i]) * s * u[i];
        }
    }

    pub fn quadrature(&self) -> JumpQuadrature {
        self.jumps
            .as_ref()
            .map(|j| j.default_quadrature())
            .unwrap_or_else(JumpQuadrature::empty)
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            ell: self.ell.clone(),
            mu: self.mu.clone(),
            gamma: self.gamma.clone(),
            lambda: self.lambda.clone(),
            sigma: self.sigma.clone(),
            beta: self.beta(),
            theta: self.jumps.as_ref().map(|j| j.theta).unwrap_or(0.0),
            jump_law: self.jumps.as_ref().map(|j| j.base.name()),
        }
    }
}
