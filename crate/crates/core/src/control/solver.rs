use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;
use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use super::grid::{stationary_scale, Grid};
use super::hamiltonian::UpwindObjective;
use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::policy::{ControlField, GridField};

/// Treatment of values outside the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `V(y) = V(πy) + (g(y) - 1)(V(πy) - V(x_ref))` with
    /// `g(y) = ((1 + |y|²) / (1 + |πy|²))^{m/2}`, `π` the projection onto
    /// the box and `x_ref` the anchor node. Constants extend as constants.
    Growth,
    /// `V(y) = V(πy)`.
    Neumann,
}

/// Discretization and iteration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Box half-width.
    pub a: f64,
    /// Grid spacing.
    pub h: f64,
    pub boundary: Boundary,
    /// Policy iteration stops when the sup-norm HJB residual is at most
    /// `tol · max(1, |V|∞)`.
    pub tol: f64,
    pub max_policy_iters: usize,
    /// Relative tolerance of each policy evaluation.
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    pub restart: usize,
    /// Neglected jump-size tail mass.
    pub jump_tail: f64,
    pub jump_panels: usize,
    pub jump_order: usize,
    /// Stop the vanishing-discount sequence when consecutive extrapolated
    /// values differ by at most `ergodic_tol · max(1, |ρ|)`.
    pub ergodic_tol: f64,
    pub max_halvings: usize,
    /// Normalization point of the ergodic value function (origin when
    /// absent).
    pub anchor: Option<Vec<f64>>,
    /// Require `a ≥ 5 ·` the stationary scale estimate.
    pub check_box: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            a: 8.0,
            h: 0.1,
            boundary: Boundary::Growth,
            tol: 1e-8,
            max_policy_iters: 50,
            linear_tol: 1e-12,
            max_linear_iters: 3000,
            restart: 40,
            jump_tail: 1e-8,
            jump_panels: 16,
            jump_order: 4,
            ergodic_tol: 1e-4,
            max_halvings: 10,
            anchor: None,
            check_box: true,
        }
    }
}

/// Which equation was solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SolveMode {
    Discounted { alpha: f64 },
    Ergodic,
}

/// One policy-iteration step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub alpha: f64,
    pub iteration: usize,
    pub value_sup: f64,
    pub value_at_anchor: f64,
    /// Sup-norm HJB residual after the evaluation.
    pub residual: f64,
    /// Nodes whose control changed in the improvement step.
    pub changed: usize,
    pub linear_iters: usize,
    /// `max(V_new - V_old)` over nodes, zero on the first iteration.
    pub max_increase: f64,
}

/// One discount level of the vanishing-discount sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaRecord {
    pub alpha: f64,
    /// `α V_α(anchor)`.
    pub scaled_value: f64,
    /// Two-point extrapolation `2 a_j - a_{j-1}`.
    pub extrapolated: Option<f64>,
}

/// Value function and control on the grid.
#[derive(Clone, Debug, Serialize)]
pub struct SolverOutput {
    pub grid: Grid,
    pub mode: SolveMode,
    pub boundary: Boundary,
    pub values: Vec<f64>,
    /// `d` entries per node.
    pub controls: Vec<f64>,
    /// Optimal ergodic value.
    pub rho: Option<f64>,
    pub residual: f64,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
    pub alphas: Vec<AlphaRecord>,
}

impl SolverOutput {
    pub fn control_grid(&self) -> GridField {
        GridField::new(self.grid.d, self.grid.a, self.grid.h, self.controls.clone())
            .expect("solver output has a consistent grid")
    }

    pub fn control_field(&self) -> ControlField {
        ControlField::Grid(self.control_grid())
    }

    /// Interpolated value; points outside the box are projected onto it.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v.clamp(-self.grid.a, self.grid.a)).collect();
        self.grid.interpolate(&self.values, &y)
    }

    pub fn control_at_node(&self, idx: usize) -> &[f64] {
        &self.controls[idx * self.grid.d..(idx + 1) * self.grid.d]
    }

    /// Number of policy evaluations at the given discount.
    pub fn policy_iterations(&self, alpha: f64) -> usize {
        self.log.iter().filter(|r| r.alpha == alpha).count()
    }
}

struct Scheme<'a> {
    grid: Grid,
    model: &'a DiffusionModel,
    cost: &'a CostSpec,
    alpha: f64,
    boundary: Boundary,
    /// Displacement `λ s_k` and weight of each jump node.
    jumps: Vec<(Vec<f64>, f64)>,
    jump_mass: f64,
    /// `σ_i² / (2h²)`.
    diffusion: Vec<f64>,
    /// Reference node of the growth extrapolation.
    reference: usize,
}

/// Neighbor of a node along one axis: inside node index or ghost factor.
enum Neighbor {
    Node(usize),
    Ghost(f64),
}

impl<'a> Scheme<'a> {
    fn new(
        grid: Grid,
        model: &'a DiffusionModel,
        cost: &'a CostSpec,
        alpha: f64,
        reference: usize,
        opts: &SolverOptions,
    ) -> Self {
        let jumps: Vec<(Vec<f64>, f64)> = match &model.jumps {
            Some(j) if j.beta > 0.0 => {
                let q = j.quadrature(opts.jump_tail, opts.jump_panels, opts.jump_order);
                q.sizes
                    .iter()
                    .zip(&q.weights)
                    .map(|(s, w)| (model.lambda.iter().map(|l| l * s).collect(), *w))
                    .collect()
            }
            _ => Vec::new(),
        };
        let jump_mass = jumps.iter().map(|j| j.1).sum();
        let diffusion = model.sigma.iter().map(|s| s * s / (2.0 * grid.h * grid.h)).collect();
        Scheme {
            grid,
            model,
            cost,
            alpha,
            boundary: opts.boundary,
            jumps,
            jump_mass,
            diffusion,
            reference,
        }
    }

    fn n(&self) -> usize {
        self.grid.len()
    }

    fn d(&self) -> usize {
        self.grid.d
    }

    fn growth(&self, y: &[f64], py: &[f64]) -> f64 {
        match self.boundary {
            Boundary::Neumann => 1.0,
            Boundary::Growth => {
                let ny: f64 = y.iter().map(|v| v * v).sum();
                let np: f64 = py.iter().map(|v| v * v).sum();
                ((1.0 + ny) / (1.0 + np)).powf(0.5 * self.cost.m)
            }
        }
    }

    /// Value at an arbitrary point, extrapolated outside the box.
    fn sample(&self, v: &[f64], y: &[f64]) -> f64 {
        if self.grid.contains(y) {
            return self.grid.interpolate(v, y);
        }
        let a = self.grid.a;
        let py: Vec<f64> = y.iter().map(|t| t.clamp(-a, a)).collect();
        let base = self.grid.interpolate(v, &py);
        base + (self.growth(y, &py) - 1.0) * (base - v[self.reference])
    }

    fn neighbor(&self, idx: usize, ks: [usize; 2], x: &[f64], axis: usize, up: bool) -> Neighbor {
        let k = ks[axis];
        let stride = self.grid.stride(axis);
        if up && k + 1 < self.grid.m {
            Neighbor::Node(idx + stride)
        } else if !up && k > 0 {
            Neighbor::Node(idx - stride)
        } else {
            let mut y = x.to_vec();
            y[axis] += if up { self.grid.h } else { -self.grid.h };
            Neighbor::Ghost(self.growth(&y, x))
        }
    }

    fn neighbor_value(&self, v: &[f64], idx: usize, nb: &Neighbor) -> f64 {
        match nb {
            Neighbor::Node(j) => v[*j],
            Neighbor::Ghost(g) => v[idx] + (g - 1.0) * (v[idx] - v[self.reference]),
        }
    }

    /// Upwind drift coefficients `(up_i, dn_i)` including diffusion.
    fn coefficients(&self, x: &[f64], u: &[f64]) -> [(f64, f64); 2] {
        let mut b = [0.0; 2];
        self.model.drift_into(x, u, &mut b[..self.d()]);
        let mut c = [(0.0, 0.0); 2];
        for i in 0..self.d() {
            c[i] = (
                b[i].max(0.0) / self.grid.h + self.diffusion[i],
                (-b[i]).max(0.0) / self.grid.h + self.diffusion[i],
            );
        }
        c
    }

    fn jump_average(&self, v: &[f64], x: &[f64]) -> f64 {
        let mut y = [0.0; 2];
        let d = self.d();
        let mut acc = 0.0;
        for (disp, w) in &self.jumps {
            for i in 0..d {
                y[i] = x[i] + disp[i];
            }
            acc += w * self.sample(v, &y[..d]);
        }
        acc
    }

    /// Local operator with reflecting ghosts, plus the jump mass on the
    /// diagonal.
    fn assemble(&self, policy: &[f64]) -> Result<SparseColMat<usize, f64>> {
        let d = self.d();
        let mut trip = Vec::with_capacity(self.n() * (1 + 2 * d));
        let mut x = [0.0; 2];
        for idx in 0..self.n() {
            self.grid.point_into(idx, &mut x[..d]);
            let ks = self.grid.indices(idx);
            let coef = self.coefficients(&x[..d], &policy[idx * d..(idx + 1) * d]);
            let mut diag = self.alpha + self.jump_mass;
            for (i, &(up, dn)) in coef.iter().enumerate().take(d) {
                if !(up >= 0.0 && dn >= 0.0 && up.is_finite() && dn.is_finite()) {
                    return Err(Error::NonMonotone(format!(
                        "negative or non-finite coefficient at node {:?} axis {}",
                        &x[..d],
                        i + 1
                    )));
                }
                for (c, dir) in [(up, true), (dn, false)] {
                    match self.neighbor(idx, ks, &x[..d], i, dir) {
                        Neighbor::Node(j) => {
                            diag += c;
                            trip.push(Triplet::new(idx, j, -c));
                        }
                        Neighbor::Ghost(_) => {}
                    }
                }
            }
            if !(diag > 0.0) {
                return Err(Error::NonMonotone(format!(
                    "nonpositive diagonal at node {:?}",
                    &x[..d]
                )));
            }
            trip.push(Triplet::new(idx, idx, diag));
        }
        SparseColMat::try_new_from_triplets(self.n(), self.n(), &trip)
            .map_err(|e| Error::NoConvergence(format!("sparse assembly failed: {e:?}")))
    }

    /// Jump average plus the non-reflecting part of the boundary ghosts.
    fn explicit_part(&self, policy: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.d();
        par_map(self.n(), |idx| {
            let mut x = [0.0; 2];
            self.grid.point_into(idx, &mut x[..d]);
            let mut acc = self.jump_average(v, &x[..d]);
            if self.boundary == Boundary::Growth {
                let ks = self.grid.indices(idx);
                let on_edge = (0..d).any(|i| ks[i] == 0 || ks[i] + 1 == self.grid.m);
                if on_edge {
                    let coef = self.coefficients(&x[..d], &policy[idx * d..(idx + 1) * d]);
                    for (i, &(up, dn)) in coef.iter().enumerate().take(d) {
                        for (c, dir) in [(up, true), (dn, false)] {
                            if let Neighbor::Ghost(g) = self.neighbor(idx, ks, &x[..d], i, dir) {
                                acc += c * (g - 1.0) * (v[idx] - v[self.reference]);
                            }
                        }
                    }
                }
            }
            acc
        })
    }

    fn running_costs(&self, policy: &[f64]) -> Vec<f64> {
        let d = self.d();
        let mut x = [0.0; 2];
        (0..self.n())
            .map(|idx| {
                self.grid.point_into(idx, &mut x[..d]);
                self.cost.eval(&x[..d], &policy[idx * d..(idx + 1) * d])
            })
            .collect()
    }

    /// Solves `(M - K) V = r` for the given policy, starting from `v`.
    fn evaluate(&self, policy: &[f64], v: &mut [f64], opts: &SolverOptions) -> Result<usize> {
        let mat = self.assemble(policy)?;
        let lu: Lu<usize, f64> = mat
            .sp_lu()
            .map_err(|e| Error::NoConvergence(format!("sparse LU failed: {e:?}")))?;
        let n = self.n();
        let solve = |rhs: &[f64]| -> Vec<f64> {
            let c = Col::from_fn(n, |i| rhs[i]);
            let s = lu.solve(&c);
            (0..n).map(|i| s[i]).collect()
        };
        let b = solve(&self.running_costs(policy));
        if self.jumps.is_empty() && self.boundary == Boundary::Neumann {
            v.copy_from_slice(&b);
            return Ok(1);
        }
        let apply = |w: &[f64]| -> Vec<f64> {
            let kw = solve(&self.explicit_part(policy, w));
            w.iter().zip(&kw).map(|(a, c)| a - c).collect()
        };
        gmres(apply, &b, v, opts.linear_tol, opts.restart, opts.max_linear_iters)
            .map_err(|r| Error::NoConvergence(format!("policy evaluation stalled at relative residual {r:e}")))
    }

    /// Improvement sweep: new policy and the sup-norm HJB residual of `v`.
    fn improve(&self, policy: &[f64], v: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
        let d = self.d();
        let results: Vec<Result<(Vec<f64>, f64, bool)>> = par_map(self.n(), |idx| {
            let mut x = [0.0; 2];
            self.grid.point_into(idx, &mut x[..d]);
            let ks = self.grid.indices(idx);
            let vp = v[idx];
            let mut fwd = [0.0; 2];
            let mut bwd = [0.0; 2];
            let mut second = 0.0;
            for i in 0..d {
                let up = self.neighbor_value(v, idx, &self.neighbor(idx, ks, &x[..d], i, true));
                let dn = self.neighbor_value(v, idx, &self.neighbor(idx, ks, &x[..d], i, false));
                fwd[i] = (up - vp) / self.grid.h;
                bwd[i] = (vp - dn) / self.grid.h;
                second += self.diffusion[i] * (up - 2.0 * vp + dn);
            }
            let jump = self.jump_average(v, &x[..d]) - self.jump_mass * vp;
            let obj = UpwindObjective {
                model: self.model,
                cost: self.cost,
                x: &x[..d],
                fwd: &fwd[..d],
                bwd: &bwd[..d],
            };
            let current = &policy[idx * d..(idx + 1) * d];
            let (u_new, v_new) = obj.minimize(1e-10)?;
            let v_cur = obj.eval(current);
            let residual = (self.alpha * vp - (v_new + second + jump)).abs();
            if v_cur - v_new > 1e-12 * (1.0 + v_cur.abs()) {
                Ok((u_new, residual, true))
            } else {
                Ok((current.to_vec(), residual, false))
            }
        });
        let mut new_policy = Vec::with_capacity(policy.len());
        let mut residual = 0.0f64;
        let mut changed = 0;
        for r in results {
            let (u, res, ch) = r?;
            new_policy.extend_from_slice(&u);
            residual = residual.max(res);
            changed += ch as usize;
        }
        Ok((new_policy, residual, changed))
    }
}

/// Restarted GMRES for `A x = b`; returns the iteration count or the
/// final relative residual on failure.
fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> std::result::Result<usize, f64> {
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(p, q)| p * q).sum::<f64>();
    let norm = |a: &[f64]| dot(a, a).sqrt();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut total = 0;
    loop {
        let ax = apply(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok(total);
        }
        if total >= max_iters {
            return Err(beta / bnorm);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut k = 0;
        for j in 0..restart {
            let mut w = apply(&basis[j]);
            total += 1;
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                hess[i][j] = hij;
                for (wv, bv) in w.iter_mut().zip(&basis[i]) {
                    *wv -= hij * bv;
                }
            }
            let hn = norm(&w);
            hess[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            cs[j] = hess[j][j] / denom;
            sn[j] = hess[j + 1][j] / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k = j + 1;
            if hn > 0.0 {
                basis.push(w.iter().map(|v| v / hn).collect());
            }
            if g[j + 1].abs() <= tol * bnorm || total >= max_iters || hn == 0.0 {
                break;
            }
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| hess[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xv, bv) in x.iter_mut().zip(&basis[i]) {
                *xv += yi * bv;
            }
        }
    }
}

fn prepare(model: &DiffusionModel, cost: &CostSpec, opts: &SolverOptions) -> Result<Grid> {
    cost.validate()?;
    let grid = Grid::new(model.d(), opts.a, opts.h)?;
    if let Some(j) = &model.jumps {
        j.check_moments(cost.m)?;
    }
    if opts.check_box {
        let scale = stationary_scale(model);
        if opts.a < 5.0 * scale {
            return Err(Error::Validation(vec![format!(
                "box half-width {} is below 5 × the stationary scale estimate {scale:.4}",
                opts.a
            )]));
        }
    }
    Ok(grid)
}

fn anchor_index(grid: &Grid, opts: &SolverOptions) -> usize {
    match &opts.anchor {
        Some(x) => grid.nearest(x),
        None => grid.nearest(&vec![0.0; grid.d]),
    }
}

/// Howard policy iteration at one discount, warm-started from `(v, policy)`.
fn policy_iteration(
    scheme: &Scheme<'_>,
    v: &mut Vec<f64>,
    policy: &mut Vec<f64>,
    anchor: usize,
    opts: &SolverOptions,
    log: &mut Vec<IterationRecord>,
) -> Result<f64> {
    let mut prev: Option<Vec<f64>> = None;
    for iteration in 1..=opts.max_policy_iters {
        let linear_iters = scheme.evaluate(policy, v, opts)?;
        let (new_policy, residual, changed) = scheme.improve(policy, v)?;
        let value_sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let max_increase = prev
            .as_ref()
            .map(|p| v.iter().zip(p).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(0.0);
        log::debug!(
            "alpha {} iteration {iteration}: residual {residual:e}, {changed} nodes changed, {linear_iters} linear iterations",
            scheme.alpha
        );
        log.push(IterationRecord {
            alpha: scheme.alpha,
            iteration,
            value_sup,
            value_at_anchor: v[anchor],
            residual,
            changed,
            linear_iters,
            max_increase,
        });
        let threshold = opts.tol * value_sup.max(1.0);
        if residual <= threshold {
            *policy = new_policy;
            return Ok(residual);
        }
        if changed == 0 {
            return Err(Error::NoConvergence(format!(
                "policy is stable but the HJB residual {residual:e} exceeds {threshold:e}; tighten linear_tol"
            )));
        }
        *policy = new_policy;
        prev = Some(v.clone());
    }
    Err(Error::NoConvergence(format!(
        "policy iteration did not reach tolerance {} in {} iterations",
        opts.tol, opts.max_policy_iters
    )))
}

fn initial_policy(grid: &Grid) -> Vec<f64> {
    let d = grid.d;
    let mut p = vec![0.0; grid.len() * d];
    for idx in 0..grid.len() {
        p[idx * d + d - 1] = 1.0;
    }
    p
}

/// Minimal nonnegative solution of the discounted HJB equation on the
/// grid, with the optimal Markov control.
pub fn solve_discounted(
    model: &DiffusionModel,
    cost: &CostSpec,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<SolverOutput> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(
            "alpha",
            format!("discount must be positive, got {alpha}"),
        ));
    }
    let grid = prepare(model, cost, opts)?;
    let anchor = anchor_index(&grid, opts);
    let scheme = Scheme::new(grid, model, cost, alpha, anchor, opts);
    let mut v = vec![0.0; grid.len()];
    let mut policy = initial_policy(&grid);
    let mut log = Vec::new();
    let residual = policy_iteration(&scheme, &mut v, &mut policy, anchor, opts, &mut log)?;
    Ok(SolverOutput {
        grid,
        mode: SolveMode::Discounted { alpha },
        boundary: opts.boundary,
        values: v,
        controls: policy,
        rho: None,
        residual,
        converged: true,
        log,
        alphas: Vec::new(),
    })
}

/// Ergodic HJB by vanishing discount: solves at `α = 1, 1/2, 1/4, …`,
/// extrapolates `α V_α(anchor)` by two-point Richardson, and returns
/// `V = V_α - V_α(anchor)` at the last discount.
pub fn solve_ergodic(model: &DiffusionModel, cost: &CostSpec, opts: &SolverOptions) -> Result<SolverOutput> {
    cost.require_ergodic()?;
    if !model.gamma.iter().any(|g| *g > 0.0) {
        return Err(Error::Validation(vec![
            "the ergodic problem needs some positive abandonment rate".into(),
        ]));
    }
    let grid = prepare(model, cost, opts)?;
    let anchor = anchor_index(&grid, opts);
    let mut v = vec![0.0; grid.len()];
    let mut policy = initial_policy(&grid);
    let mut log = Vec::new();
    let mut alphas: Vec<AlphaRecord> = Vec::new();
    let mut alpha = 1.0;
    let mut residual = 0.0;
    let mut converged = false;
    for level in 0..=opts.max_halvings {
        if level > 0 {
            let prev = alphas.last().expect("previous level").scaled_value;
            let add = prev * (1.0 / alpha - 1.0 / (2.0 * alpha));
            for x in v.iter_mut() {
                *x += add;
            }
        }
        let scheme = Scheme::new(grid, model, cost, alpha, anchor, opts);
        residual = policy_iteration(&scheme, &mut v, &mut policy, anchor, opts, &mut log)?;
        let scaled = alpha * v[anchor];
        let extrapolated = alphas.last().map(|p| 2.0 * scaled - p.scaled_value);
        alphas.push(AlphaRecord {
            alpha,
            scaled_value: scaled,
            extrapolated,
        });
        let n = alphas.len();
        if n >= 3 {
            let (r1, r0) = (alphas[n - 1].extrapolated.unwrap(), alphas[n - 2].extrapolated.unwrap());
            if (r1 - r0).abs() <= opts.ergodic_tol * r1.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        alpha *= 0.5;
    }
    let last = alphas.last().expect("at least one discount level");
    let rho = last.extrapolated.unwrap_or(last.scaled_value);
    if !converged {
        log::warn!(
            "vanishing-discount sequence did not settle within {} halvings; reporting rho = {rho}",
            opts.max_halvings
        );
    }
    let base = v[anchor];
    for x in v.iter_mut() {
        *x -= base;
    }
    Ok(SolverOutput {
        grid,
        mode: SolveMode::Ergodic,
        boundary: opts.boundary,
        values: v,
        controls: policy,
        rho: Some(rho),
        residual,
        converged,
        log,
        alphas,
    })
}
