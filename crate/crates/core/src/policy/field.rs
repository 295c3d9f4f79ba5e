use std::fmt;
use std::sync::Arc;

use super::{last_class, project_simplex};
use crate::error::{Error, Result};

/// Control values `v(x)` on a regular grid over `[-a, a]^d`, stored node by
/// node with the first coordinate varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub d: usize,
    pub a: f64,
    pub h: f64,
    /// Nodes per axis.
    pub m: usize,
    /// `d` entries per node.
    pub controls: Vec<f64>,
}

impl GridField {
    pub fn new(d: usize, a: f64, h: f64, controls: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported(format!("grid controls need d ≤ 2, got {d}")));
        }
        let m = (2.0 * a / h).round() as usize + 1;
        if controls.len() != m.pow(d as u32) * d {
            return Err(Error::Parse(format!(
                "grid with {m} nodes per axis in dimension {d} needs {} control entries, got {}",
                m.pow(d as u32) * d,
                controls.len()
            )));
        }
        Ok(GridField { d, a, h, m, controls })
    }

    /// Multilinear interpolation, projected onto the simplex; `e_d` outside
    /// the box.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        if x.iter().any(|v| !(v.abs() <= self.a)) {
            out.fill(0.0);
            out[d - 1] = 1.0;
            return;
        }
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for i in 0..d {
            let s = (x[i] + self.a) / self.h;
            let k = (s.floor() as usize).min(self.m - 2);
            base[i] = k;
            frac[i] = (s - k as f64).clamp(0.0, 1.0);
        }
        out.fill(0.0);
        let corners = 1usize << d;
        for c in 0..corners {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut stride = 1usize;
            for i in 0..d {
                let bit = (c >> i) & 1;
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                idx += (base[i] + bit) * stride;
                stride *= self.m;
            }
            if w == 0.0 {
                continue;
            }
            for j in 0..d {
                out[j] += w * self.controls[idx * d + j];
            }
        }
        let moved = project_simplex(out);
        if moved > 1e-9 {
            log::debug!("interpolated control moved by {moved:e} onto the simplex");
        }
    }
}

/// A control that follows `inner` inside the ball of radius `r - delta`,
/// equals `e_d` outside radius `r`, and blends linearly in between.
#[derive(Clone, Debug)]
pub struct ShapedField {
    pub inner: Box<ControlField>,
    pub radius: f64,
    pub delta: f64,
}

impl ShapedField {
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = out.len();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= self.radius {
            out.fill(0.0);
            out[d - 1] = 1.0;
            return;
        }
        self.inner.eval_into(x, out);
        let inner_edge = self.radius - self.delta;
        if norm > inner_edge {
            let w = (self.radius - norm) / self.delta;
            for v in out.iter_mut() {
                *v *= w;
            }
            out[d - 1] += 1.0 - w;
        }
    }
}

/// A Markov control `x ↦ v(x)` with values on the probability simplex.
#[derive(Clone)]
pub enum ControlField {
    Constant(Vec<f64>),
    Grid(GridField),
    Shaped(ShapedField),
    Function {
        d: usize,
        f: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
    },
}

impl fmt::Debug for ControlField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlField::Constant(u) => write!(f, "Constant({u:?})"),
            ControlField::Grid(g) => write!(f, "Grid(d={}, a={}, h={})", g.d, g.a, g.h),
            ControlField::Shaped(s) => write!(f, "Shaped(radius={}, delta={}, {:?})", s.radius, s.delta, s.inner),
            ControlField::Function { d, .. } => write!(f, "Function(d={d})"),
        }
    }
}

impl ControlField {
    /// The constant control `e_d`.
    pub fn last_class(d: usize) -> Self {
        ControlField::Constant(last_class(d))
    }

    pub fn constant(u: Vec<f64>) -> Result<Self> {
        super::check_simplex(&u, 1e-12)?;
        Ok(ControlField::Constant(u))
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlField::Constant(u) => u.len(),
            ControlField::Grid(g) => g.d,
            ControlField::Shaped(s) => s.inner.dim(),
            ControlField::Function { d, .. } => *d,
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ControlField::Constant(u) => out.copy_from_slice(u),
            ControlField::Grid(g) => g.eval_into(x, out),
            ControlField::Shaped(s) => s.eval_into(x, out),
            ControlField::Function { f, .. } => f(x, out),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Follows `self` inside `B_{r - delta}`, equals `e_d` outside `B_r`,
    /// blends linearly on the shell.
    pub fn shaped(self, radius: f64, delta: f64) -> Self {
        ControlField::Shaped(ShapedField {
            inner: Box::new(self),
            radius,
            delta: delta.min(radius).max(f64::MIN_POSITIVE),
        })
    }
}

/// Centering and scaling maps for head-count vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledChart {
    pub n: u64,
    pub rho: Vec<f64>,
}

impl ScaledChart {
    pub fn new(n: u64, rho: &[f64]) -> Self {
        ScaledChart { n, rho: rho.to_vec() }
    }

    /// `x - ρn`.
    pub fn centered(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n as f64;
        x.iter().zip(&self.rho).map(|(v, r)| v - r * n).collect()
    }

    /// `(x - ρn)/√n`.
    pub fn scaled(&self, x: &[f64]) -> Vec<f64> {
        let s = (self.n as f64).sqrt();
        self.centered(x).into_iter().map(|v| v / s).collect()
    }

    /// Inverse of [`ScaledChart::scaled`].
    pub fn unscaled(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n as f64;
        y.iter().zip(&self.rho).map(|(v, r)| r * n + n.sqrt() * v).collect()
    }

    /// Whether `|x - ρn| ≤ R√n`.
    pub fn in_region(&self, x: &[f64], radius: f64) -> bool {
        let c = self.centered(x);
        c.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius * (self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_interpolation_and_outside_value() {
        // d = 1 grid on [-1, 1] with h = 1: trivially the simplex {1}.
        let g = GridField::new(1, 1.0, 1.0, vec![1.0; 3]).unwrap();
        let mut out = [0.0];
        g.eval_into(&[0.3], &mut out);
        assert_eq!(out, [1.0]);

        // d = 2, 3x3 nodes; control (1,0) on the left column, (0,1) elsewhere.
        let mut c = Vec::new();
        for _j in 0..3 {
            for i in 0..3 {
                if i == 0 {
                    c.extend([1.0, 0.0]);
                } else {
                    c.extend([0.0, 1.0]);
                }
            }
        }
        let f = ControlField::Grid(GridField::new(2, 1.0, 1.0, c).unwrap());
        let u = f.eval(&[-0.5, 0.2]);
        assert!((u[0] - 0.5).abs() < 1e-15 && (u[1] - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(&[-1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(f.eval(&[-1.5, 0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn shaped_field_blends_on_shell() {
        let f = ControlField::Constant(vec![1.0, 0.0]).shaped(2.0, 0.5);
        assert_eq!(f.eval(&[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(f.eval(&[3.0, 0.0]), vec![0.0, 1.0]);
        let mid = f.eval(&[1.75, 0.0]);
        assert!((mid[0] - 0.5).abs() < 1e-12 && (mid[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chart_round_trip() {
        let chart = ScaledChart::new(100, &[0.5, 0.5]);
        assert_eq!(chart.scaled(&[60.0, 40.0]), vec![1.0, -1.0]);
        assert_eq!(chart.unscaled(&[1.0, -1.0]), vec![60.0, 40.0]);
        assert!(chart.in_region(&[60.0, 40.0], 1.5));
        assert!(!chart.in_region(&[60.0, 40.0], 1.0));
    }
}
