use serde::Serialize;

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};

/// Regular grid over the box `[-a, a]^d` with spacing `h`, first coordinate
/// varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub d: usize,
    pub a: f64,
    pub h: f64,
    /// Nodes per axis.
    pub m: usize,
}

impl Grid {
    pub fn new(d: usize, a: f64, h: f64) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(Error::Unsupported(format!("the HJB solver handles d ≤ 2, got d = {d}")));
        }
        if !(a > 0.0 && h > 0.0 && a.is_finite() && h.is_finite()) {
            return Err(Error::config(
                "solver",
                format!("box half-width and spacing must be positive, got a = {a}, h = {h}"),
            ));
        }
        let cells = 2.0 * a / h;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::config(
                "solver.h",
                format!("2a/h must be an integer, got {cells}"),
            ));
        }
        let m = cells.round() as usize + 1;
        if m < 5 {
            return Err(Error::config(
                "solver.h",
                format!("grid needs at least 5 nodes per axis, got {m}"),
            ));
        }
        Ok(Grid { d, a, h, m })
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.m
        }
    }

    /// Axis indices of node `idx`.
    pub fn indices(&self, idx: usize) -> [usize; 2] {
        [idx % self.m, if self.d == 2 { idx / self.m } else { 0 }]
    }

    pub fn coord(&self, k: usize) -> f64 {
        -self.a + k as f64 * self.h
    }

    pub fn point_into(&self, idx: usize, out: &mut [f64]) {
        let ks = self.indices(idx);
        for i in 0..self.d {
            out[i] = self.coord(ks[i]);
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        self.point_into(idx, &mut x);
        x
    }

    /// Node nearest to `x` (clamped to the box).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for i in 0..self.d {
            let k = ((x[i] + self.a) / self.h).round().clamp(0.0, (self.m - 1) as f64) as usize;
            idx += k * self.stride(i);
        }
        idx
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.a)
    }

    /// Multilinear interpolation weights at a point inside the box.
    pub fn weights(&self, x: &[f64]) -> ([usize; 4], [f64; 4], usize) {
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for i in 0..self.d {
            let s = (x[i] + self.a) / self.h;
            let k = (s.floor().max(0.0) as usize).min(self.m - 2);
            base[i] = k;
            frac[i] = (s - k as f64).clamp(0.0, 1.0);
        }
        let corners = 1usize << self.d;
        let mut idx = [0usize; 4];
        let mut w = [0.0f64; 4];
        for c in 0..corners {
            let mut wc = 1.0;
            let mut ic = 0;
            for i in 0..self.d {
                let bit = (c >> i) & 1;
                wc *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                ic += (base[i] + bit) * self.stride(i);
            }
            idx[c] = ic;
            w[c] = wc;
        }
        (idx, w, corners)
    }

    /// Multilinear interpolation of node values at a point inside the box.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let (idx, w, n) = self.weights(x);
        (0..n).map(|c| w[c] * values[idx[c]]).sum()
    }
}

/// Rough scale of the stationary law: per class
/// `σ_i / √(2κ_i) + (|ℓ_i| + λ_i β E[s]) / κ_i` with `κ_i = min(μ_i, γ_i)`
/// over the positive rates, maximized over classes.
pub fn stationary_scale(model: &DiffusionModel) -> f64 {
    let mean_jump = model.jumps.as_ref().and_then(|j| j.moment(1.0).ok()).unwrap_or(0.0);
    let beta = model.beta();
    (0..model.d())
        .map(|i| {
            let kappa = if model.gamma[i] > 0.0 {
                model.mu[i].min(model.gamma[i])
            } else {
                model.mu[i]
            };
            model.sigma[i] / (2.0 * kappa).sqrt() + (model.ell[i].abs() + model.lambda[i] * beta * mean_jump) / kappa
        })
        .fold(0.0, f64::max)
}
