use super::model::{DiffusionModel, JumpQuadrature};
use super::simulate::DiffPath;
use crate::error::Result;
use crate::policy::ControlField;
use crate::stats::{BatchAccumulator, Estimate};

/// A twice-differentiable function with analytic first derivatives and
/// second derivatives along the axes.
pub trait TestFunction: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian_diag(&self, x: &[f64], out: &mut [f64]);
}

/// Polynomial test functions without compact support.
#[derive(Clone, Debug, PartialEq)]
pub enum Polynomial {
    Constant(f64),
    /// `⟨e, x⟩`.
    Sum,
    /// `|x|²`.
    SquaredNorm,
    /// `x_i²`.
    CoordinateSquare(usize),
}

impl TestFunction for Polynomial {
    fn name(&self) -> String {
        match self {
            Polynomial::Constant(c) => format!("constant({c})"),
            Polynomial::Sum => "sum".into(),
            Polynomial::SquaredNorm => "squared_norm".into(),
            Polynomial::CoordinateSquare(i) => format!("x{}^2", i + 1),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Polynomial::Constant(c) => *c,
            Polynomial::Sum => x.iter().sum(),
            Polynomial::SquaredNorm => x.iter().map(|v| v * v).sum(),
            Polynomial::CoordinateSquare(i) => x[*i] * x[*i],
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (j, g) in out.iter_mut().enumerate() {
            *g = match self {
                Polynomial::Constant(_) => 0.0,
                Polynomial::Sum => 1.0,
                Polynomial::SquaredNorm => 2.0 * x[j],
                Polynomial::CoordinateSquare(i) => {
                    if j == *i {
                        2.0 * x[j]
                    } else {
                        0.0
                    }
                }
            };
        }
    }

    fn hessian_diag(&self, _x: &[f64], out: &mut [f64]) {
        for (j, h) in out.iter_mut().enumerate() {
            *h = match self {
                Polynomial::Constant(_) | Polynomial::Sum => 0.0,
                Polynomial::SquaredNorm => 2.0,
                Polynomial::CoordinateSquare(i) => {
                    if j == *i {
                        2.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }
}

/// Polynomial factor of a [`CutoffPolynomial`].
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    One,
    Coordinate(usize),
    CoordinateSquare(usize),
    Product(usize, usize),
}

impl Factor {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Coordinate(i) => x[*i],
            Factor::CoordinateSquare(i) => x[*i] * x[*i],
            Factor::Product(i, j) => x[*i] * x[*j],
        }
    }

    fn partial(&self, x: &[f64], k: usize) -> f64 {
        match self {
            Factor::One => 0.0,
            Factor::Coordinate(i) => (k == *i) as u8 as f64,
            Factor::CoordinateSquare(i) => {
                if k == *i {
                    2.0 * x[k]
                } else {
                    0.0
                }
            }
            Factor::Product(i, j) => {
                let mut v = 0.0;
                if k == *i {
                    v += x[*j];
                }
                if k == *j {
                    v += x[*i];
                }
                v
            }
        }
    }

    fn second(&self, k: usize) -> f64 {
        match self {
            Factor::CoordinateSquare(i) if k == *i => 2.0,
            Factor::Product(i, j) if k == *i && k == *j => 2.0,
            _ => 0.0,
        }
    }
}

/// `p(x)·φ(x)` with the smooth bump `φ(x) = exp(-1/(1 - |x-c|²/r²))`
/// supported on the ball of radius `r` around `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffPolynomial {
    pub center: Vec<f64>,
    pub radius: f64,
    pub factor: Factor,
}

impl CutoffPolynomial {
    /// Returns `(φ, 1 - s)` with `s = |x-c|²/r²`, or `None` outside.
    fn bump(&self, x: &[f64]) -> Option<(f64, f64)> {
        let r2 = self.radius * self.radius;
        let s: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / r2;
        if s >= 1.0 {
            return None;
        }
        let w = 1.0 - s;
        Some(((-1.0 / w).exp(), w))
    }
}

impl TestFunction for CutoffPolynomial {
    fn name(&self) -> String {
        format!("bump(c={:?}, r={}, {:?})", self.center, self.radius, self.factor)
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self.bump(x) {
            None => 0.0,
            Some((phi, _)) => self.factor.value(x) * phi,
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let Some((phi, w)) = self.bump(x) else {
            out.fill(0.0);
            return;
        };
        let r2 = self.radius * self.radius;
        let p = self.factor.value(x);
        for k in 0..out.len() {
            let g = -2.0 * (x[k] - self.center[k]) / (r2 * w * w);
            out[k] = phi * (self.factor.partial(x, k) + p * g);
        }
    }

    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) {
        let Some((phi, w)) = self.bump(x) else {
            out.fill(0.0);
            return;
        };
        let r2 = self.radius * self.radius;
        let p = self.factor.value(x);
        for k in 0..out.len() {
            let y = x[k] - self.center[k];
            let g = -2.0 * y / (r2 * w * w);
            let dg = -2.0 / (r2 * w * w) - 8.0 * y * y / (r2 * r2 * w * w * w);
            let phi_kk = phi * (g * g + dg);
            out[k] = self.factor.second(k) * phi + 2.0 * self.factor.partial(x, k) * phi * g + p * phi_kk;
        }
    }
}

/// The fixed library of six smooth compactly supported test functions in
/// dimension `d`.
pub fn test_function_library(d: usize) -> Vec<CutoffPolynomial> {
    let c0 = vec![0.0; d];
    let mut c1 = vec![0.0; d];
    c1[0] = 1.0;
    let c2: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { -0.5 } else { 0.5 }).collect();
    let last = d - 1;
    vec![
        CutoffPolynomial {
            center: c0.clone(),
            radius: 3.0,
            factor: Factor::One,
        },
        CutoffPolynomial {
            center: c1,
            radius: 2.0,
            factor: Factor::One,
        },
        CutoffPolynomial {
            center: c2,
            radius: 2.5,
            factor: Factor::One,
        },
        CutoffPolynomial {
            center: c0.clone(),
            radius: 4.0,
            factor: Factor::Coordinate(0),
        },
        CutoffPolynomial {
            center: c0.clone(),
            radius: 4.0,
            factor: Factor::CoordinateSquare(last),
        },
        CutoffPolynomial {
            center: c0,
            radius: 4.0,
            factor: Factor::Product(0, last),
        },
    ]
}

/// Second-order part plus jump part of the generator, with the drift
/// supplied by the caller.
fn generator_with_drift(
    f: &dyn TestFunction,
    x: &[f64],
    b: &[f64],
    second: &[f64],
    direction: &[f64],
    quad: &JumpQuadrature,
) -> f64 {
    let d = x.len();
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d];
    f.gradient(x, &mut grad);
    f.hessian_diag(x, &mut hess);
    let mut v = 0.0;
    for i in 0..d {
        v += b[i] * grad[i] + 0.5 * second[i] * hess[i];
    }
    if !quad.sizes.is_empty() {
        let fx = f.value(x);
        let mut y = vec![0.0; d];
        for (s, w) in quad.sizes.iter().zip(&quad.weights) {
            for i in 0..d {
                y[i] = x[i] + direction[i] * s;
            }
            v += w * (f.value(&y) - fx);
        }
    }
    v
}

/// `Σ b_i ∂_i f + ½ Σ λ_i(1+c²_i) ∂_ii f + ∫ (f(x + λs) - f(x)) β F(θ ds)`.
pub fn generator_apply(
    f: &dyn TestFunction,
    x: &[f64],
    u: &[f64],
    model: &DiffusionModel,
    quad: &JumpQuadrature,
) -> f64 {
    let mut b = vec![0.0; model.d()];
    model.drift_into(x, u, &mut b);
    let second: Vec<f64> = model.sigma.iter().map(|s| s * s).collect();
    generator_with_drift(f, x, &b, &second, &model.lambda, quad)
}

/// Generator of a pre-limit system in the same form: explicit drift,
/// per-axis second-order coefficients and jumps along `direction`.
pub fn generator_general(
    f: &dyn TestFunction,
    x: &[f64],
    drift: &[f64],
    second: &[f64],
    direction: &[f64],
    quad: &JumpQuadrature,
) -> f64 {
    generator_with_drift(f, x, drift, second, direction, quad)
}

/// Time average of `𝒜f(X_t, v(X_t))` over the recorded path after
/// `burn_in`, one batch-means estimate per test function.
pub fn occupation_residual(
    path: &DiffPath,
    control: &ControlField,
    test_fns: &[&dyn TestFunction],
    model: &DiffusionModel,
    quad: &JumpQuadrature,
    burn_in: f64,
    batches: usize,
) -> Result<Vec<Estimate>> {
    let end = *path.epochs.last().unwrap_or(&0.0);
    let mut accs: Vec<BatchAccumulator> = test_fns
        .iter()
        .map(|_| BatchAccumulator::new(burn_in, end, batches))
        .collect();
    let mut u = vec![0.0; model.d()];
    for k in 0..path.len().saturating_sub(1) {
        let (t0, t1) = (path.epochs[k], path.epochs[k + 1]);
        if t1 <= burn_in {
            continue;
        }
        let x = path.state(k);
        control.eval_into(x, &mut u);
        for (f, acc) in test_fns.iter().zip(accs.iter_mut()) {
            let g = generator_apply(*f, x, &u, model, quad);
            acc.add(t0, t1, g);
        }
    }
    accs.iter().map(|a| a.estimate()).collect()
}
