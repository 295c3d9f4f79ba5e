use super::cost::CostSpec;
use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of a convex function on `[lo, hi]`.
fn golden_section(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes `f` over `[0, 1]` when `f` is convex between consecutive
/// `breaks`: golden section on every piece plus all endpoints.
pub(crate) fn minimize_piecewise(f: impl Fn(f64) -> f64, breaks: &mut Vec<f64>, tol: f64) -> (f64, f64) {
    breaks.retain(|b| *b > 0.0 && *b < 1.0);
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut best = (1.0, f(1.0));
    for w in breaks.windows(2) {
        let fa = f(w[0]);
        if fa < best.1 {
            best = (w[0], fa);
        }
        if w[1] - w[0] > tol {
            let cand = golden_section(&f, w[0], w[1], tol);
            if cand.1 < best.1 {
                best = cand;
            }
        }
    }
    best
}

/// Controlled part of the Hamiltonian along the segment
/// `u = (t, 1 - t)` with separate forward and backward difference
/// quotients per axis: `Σ_i (b_i⁺ fwd_i - b_i⁻ bwd_i) + c s^m |u|^m`.
pub(crate) struct UpwindObjective<'a> {
    pub model: &'a DiffusionModel,
    pub cost: &'a CostSpec,
    pub x: &'a [f64],
    pub fwd: &'a [f64],
    pub bwd: &'a [f64],
}

impl UpwindObjective<'_> {
    fn base(&self, i: usize) -> f64 {
        self.model.ell[i] - self.model.mu[i] * self.x[i]
    }

    fn slope(&self, i: usize, s: f64) -> f64 {
        (self.model.mu[i] - self.model.gamma[i]) * s
    }

    /// Objective at the control `u`.
    pub fn eval(&self, u: &[f64]) -> f64 {
        let s = self.x.iter().sum::<f64>().max(0.0);
        let mut v = self.cost.eval(self.x, u);
        for i in 0..self.x.len() {
            let b = self.base(i) + self.slope(i, s) * u[i];
            v += if b > 0.0 { b * self.fwd[i] } else { b * self.bwd[i] };
        }
        v
    }

    /// Minimizer over the simplex (`d ≤ 2`); `e_d` when `⟨e,x⟩ ≤ 0`.
    pub fn minimize(&self, tol: f64) -> Result<(Vec<f64>, f64)> {
        let d = self.x.len();
        let s = self.x.iter().sum::<f64>();
        if d == 1 || s <= 0.0 {
            let mut u = vec![0.0; d];
            u[d - 1] = 1.0;
            let v = self.eval(&u);
            return Ok((u, v));
        }
        if d > 2 {
            return Err(Error::Unsupported(format!(
                "Hamiltonian minimization handles d ≤ 2, got d = {d}"
            )));
        }
        let mut breaks = Vec::with_capacity(4);
        let (s0, s1) = (self.slope(0, s), self.slope(1, s));
        if s0 != 0.0 {
            breaks.push(-self.base(0) / s0);
        }
        if s1 != 0.0 {
            breaks.push(1.0 + self.base(1) / s1);
        }
        let (t, v) = minimize_piecewise(|t| self.eval(&[t, 1.0 - t]), &mut breaks, tol);
        Ok((vec![t, 1.0 - t], v))
    }
}

/// Minimizer over the simplex of the control-dependent part of the
/// Hamiltonian, `⟨b(x,u), p⟩ + c (⟨e,x⟩⁺)^m |u|^m`. Returns `e_d` when
/// `⟨e,x⟩ ≤ 0`, where the objective does not depend on `u`.
pub fn minimize_hamiltonian(x: &[f64], p: &[f64], model: &DiffusionModel, cost: &CostSpec) -> Result<Vec<f64>> {
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("gradient must be finite".into()));
    }
    let obj = UpwindObjective {
        model,
        cost,
        x,
        fwd: p,
        bwd: p,
    };
    Ok(obj.minimize(1e-10)?.0)
}

/// Value of `⟨b(x,u), p⟩ + c (⟨e,x⟩⁺)^m |u|^m`.
pub fn hamiltonian_objective(x: &[f64], u: &[f64], p: &[f64], model: &DiffusionModel, cost: &CostSpec) -> f64 {
    UpwindObjective {
        model,
        cost,
        x,
        fwd: p,
        bwd: p,
    }
    .eval(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(mu: [f64; 2], gamma: [f64; 2]) -> DiffusionModel {
        DiffusionModel::new(vec![0.0; 2], mu.to_vec(), gamma.to_vec(), vec![1.0; 2], &[1.0; 2], None).unwrap()
    }

    #[test]
    fn nonpositive_total_gives_last_class() {
        let m = model([1.0, 1.0], [0.5, 0.5]);
        let c = CostSpec::new(1.0, 2.0).unwrap();
        assert_eq!(
            minimize_hamiltonian(&[-1.0, 0.5], &[3.0, -2.0], &m, &c).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn linear_objective_picks_a_vertex() {
        let m = model([2.0, 2.0], [1.0, 1.0]);
        let c = CostSpec::new(1.0, 1.0).unwrap();
        let u = minimize_hamiltonian(&[0.5, 0.5], &[3.0, 1.0], &m, &c).unwrap();
        assert!((u[0] - 0.0).abs() < 1e-9 && (u[1] - 1.0).abs() < 1e-9, "{u:?}");
    }

    #[test]
    fn symmetric_quadratic_splits_evenly() {
        let m = model([2.0, 2.0], [1.0, 1.0]);
        let c = CostSpec::new(1.0, 2.0).unwrap();
        let x = [0.5, 0.5];
        let p = [1.0, 1.0];
        let u = minimize_hamiltonian(&x, &p, &m, &c).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-8, "{u:?}");
        let best_scan = (0..=10_000)
            .map(|k| {
                let t = k as f64 * 1e-4;
                hamiltonian_objective(&x, &[t, 1.0 - t], &p, &m, &c)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(hamiltonian_objective(&x, &u, &p, &m, &c) <= best_scan + 1e-12);
    }
}
