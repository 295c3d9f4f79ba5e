use std::io::Write;

use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use super::model::DiffusionModel;
use crate::error::Result;
use crate::io::write_csv_rows;
use crate::policy::ControlField;
use crate::rng::RandomStream;

/// A logged jump of the limit process.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    /// Scalar size `s`.
    pub size: f64,
    /// Applied increment `λ s`.
    pub increment: Vec<f64>,
}

/// A sampled path: states at the recorded epochs and every jump.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffPath {
    pub d: usize,
    pub epochs: Vec<f64>,
    /// Row-major, `d` entries per epoch.
    pub states: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
}

impl DiffPath {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.d..(k + 1) * self.d]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// CSV with columns `t, x_1..x_d, jump` where `jump` counts the jumps in
    /// the interval ending at that epoch.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.d).map(|i| format!("x_{i}")));
        header.push("jump".into());
        let mut j = 0;
        let rows = (0..self.len()).map(|k| {
            let t = self.epochs[k];
            let mut count = 0;
            while j < self.jumps.len() && self.jumps[j].time <= t {
                count += 1;
                j += 1;
            }
            let mut row = vec![t.to_string()];
            row.extend(self.state(k).iter().map(|v| v.to_string()));
            row.push(count.to_string());
            row
        });
        write_csv_rows(out, &header, rows)
    }
}

/// One piece of a simulated path.
pub enum PathEvent<'a> {
    /// The Euler step from `t` to `t + h` taken from state `x` under
    /// control `u`.
    Step { t: f64, h: f64, x: &'a [f64], u: &'a [f64] },
    /// A jump applied at time `t`.
    Jump(&'a JumpRecord),
}

/// Euler–Maruyama on the grid `k·dt` with the jump epochs inserted exactly.
/// Calls `visit` for every step and jump and returns the final state.
pub fn run_path(
    model: &DiffusionModel,
    control: &ControlField,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    rng: &mut RandomStream,
    mut visit: impl FnMut(PathEvent<'_>),
) -> Vec<f64> {
    let d = model.d();
    let mut x = x0.to_vec();
    let mut u = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut t = 0.0;
    let mut k: u64 = 0;
    let beta = model.beta();
    let mut next_jump = if beta > 0.0 {
        let e: f64 = Exp1.sample(rng);
        e / beta
    } else {
        f64::INFINITY
    };
    while t < horizon {
        let grid_next = ((k + 1) as f64 * dt).min(horizon);
        let target = grid_next.min(next_jump);
        let h = target - t;
        if h > 0.0 {
            control.eval_into(&x, &mut u);
            model.drift_into(&x, &u, &mut b);
            visit(PathEvent::Step { t, h, x: &x, u: &u });
            let sh = h.sqrt();
            for i in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                x[i] += b[i] * h + model.sigma[i] * sh * z;
            }
        }
        t = target;
        if target == next_jump && next_jump <= horizon {
            let jm = model.jumps.as_ref().expect("jump epoch without jump data");
            let s = jm.sample(rng);
            let rec = JumpRecord {
                time: t,
                size: s,
                increment: model.lambda.iter().map(|l| l * s).collect(),
            };
            for i in 0..d {
                x[i] += rec.increment[i];
            }
            visit(PathEvent::Jump(&rec));
            let e: f64 = Exp1.sample(rng);
            next_jump = t + e / beta;
        }
        if target == grid_next {
            k += 1;
        }
    }
    x
}

/// Simulates to `horizon`, recording the state every `record_every` grid
/// steps (and at the horizon) together with all jumps.
pub fn simulate_recorded(
    model: &DiffusionModel,
    control: &ControlField,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    record_every: usize,
    rng: &mut RandomStream,
) -> DiffPath {
    let d = model.d();
    let mut path = DiffPath {
        d,
        epochs: vec![0.0],
        states: x0.to_vec(),
        jumps: Vec::new(),
    };
    let every = record_every.max(1) as f64 * dt;
    let mut next_record = every;
    let last = run_path(model, control, x0, horizon, dt, rng, |ev| match ev {
        PathEvent::Step { t, x, .. } => {
            if t >= next_record - 1e-9 * dt {
                path.epochs.push(t);
                path.states.extend_from_slice(x);
                while next_record <= t + 1e-9 * dt {
                    next_record += every;
                }
            }
        }
        PathEvent::Jump(rec) => path.jumps.push(rec.clone()),
    });
    if path.epochs.last().is_some_and(|&t| t < horizon) {
        path.epochs.push(horizon);
        path.states.extend_from_slice(&last);
    }
    path
}

/// Simulates to `horizon` and records the state at every Euler grid point.
pub fn simulate(
    model: &DiffusionModel,
    control: &ControlField,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    rng: &mut RandomStream,
) -> DiffPath {
    simulate_recorded(model, control, x0, horizon, dt, 1, rng)
}
