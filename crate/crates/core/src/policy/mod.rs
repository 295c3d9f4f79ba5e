//! Scheduling policies: feasible action sets, the queue-split
//! parameterization, priority rules, quantization and Markov policies built
//! from continuous controls.

mod field;
mod markov;
mod priority;

pub use field::{ControlField, GridField, ScaledChart, ShapedField};
pub use markov::{markov_from_control, quantize, MarkovControlPolicy};
pub use priority::{
    modified_priority, static_priority, IdlingPolicy, ModifiedPriority, PriorityTables, StaticPriority,
};

use serde::Serialize;

use crate::error::{Error, Result};

/// What a policy may look at: head counts, arrival ages, environment phase
/// and downtime age. The residual downtime is deliberately absent.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub x: &'a [u64],
    pub t: f64,
    pub(crate) last_arrival: &'a [f64],
    pub up: bool,
    /// Age of the current downtime; zero while up.
    pub k: f64,
}

impl<'a> Observation<'a> {
    /// Observation with all arrival ages zero at time 0, phase up.
    pub fn counts_only(x: &'a [u64], zeros: &'a [f64]) -> Self {
        Observation {
            x,
            t: 0.0,
            last_arrival: zeros,
            up: true,
            k: 0.0,
        }
    }

    /// Age of the in-progress interarrival time of class `i`.
    pub fn age(&self, i: usize) -> f64 {
        self.t - self.last_arrival[i]
    }
}

/// Descriptive metadata of a policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolicyMeta {
    pub name: String,
    pub requires_priority_order: bool,
    pub requires_control_field: bool,
}

/// A preemptive scheduling rule: maps the observable state to the number
/// of servers assigned to each class.
pub trait Policy: Send + Sync {
    fn meta(&self) -> PolicyMeta;

    /// Writes the allocation for `obs` into `z`.
    fn allocate(&self, obs: &Observation<'_>, z: &mut [u64]);

    /// Allocation for bare counts, with zero ages and the up phase.
    fn allocate_counts(&self, x: &[u64]) -> Vec<u64> {
        let zeros = vec![0.0; x.len()];
        let mut z = vec![0; x.len()];
        self.allocate(&Observation::counts_only(x, &zeros), &mut z);
        z
    }
}

/// Largest total for which [`ActionSet::enumerate`] lists the actions.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// The feasible allocations `{z ≤ x integer : Σz = Σx ∧ n}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSet {
    pub x: Vec<u64>,
    pub n: u64,
}

pub fn admissible_actions(x: &[u64], n: u64) -> ActionSet {
    ActionSet { x: x.to_vec(), n }
}

impl ActionSet {
    pub fn busy_servers(&self) -> u64 {
        self.x.iter().sum::<u64>().min(self.n)
    }

    pub fn contains(&self, z: &[u64]) -> bool {
        is_admissible(&self.x, z, self.n)
    }

    /// Lists every feasible allocation, or `None` when the total head count
    /// exceeds [`ENUMERATION_CAP`] and only the predicate is available.
    pub fn enumerate(&self) -> Option<Vec<Vec<u64>>> {
        if self.x.iter().sum::<u64>() > ENUMERATION_CAP {
            return None;
        }
        let d = self.x.len();
        let mut out = Vec::new();
        let mut z = vec![0; d];
        let suffix: Vec<u64> = (0..=d).map(|i| self.x[i.min(d)..].iter().sum()).collect();
        fn rec(i: usize, left: u64, x: &[u64], suffix: &[u64], z: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            if i == x.len() {
                if left == 0 {
                    out.push(z.clone());
                }
                return;
            }
            let rest = suffix[i + 1];
            let lo = left.saturating_sub(rest);
            let hi = x[i].min(left);
            for v in lo..=hi {
                z[i] = v;
                rec(i + 1, left - v, x, suffix, z, out);
            }
        }
        if d == 0 {
            return Some(out);
        }
        rec(0, self.busy_servers(), &self.x, &suffix, &mut z, &mut out);
        Some(out)
    }
}

/// `z ≤ x` componentwise and `Σz = Σx ∧ n`.
pub fn is_admissible(x: &[u64], z: &[u64], n: u64) -> bool {
    x.len() == z.len() && x.iter().zip(z).all(|(a, b)| b <= a) && z.iter().sum::<u64>() == x.iter().sum::<u64>().min(n)
}

/// Queue split `u = (x - z)/(Σx - n)` when `Σx > n`, otherwise `e_d`.
pub fn u_from_z(x: &[u64], z: &[u64], n: u64) -> Result<Vec<f64>> {
    if !is_admissible(x, z, n) {
        return Err(Error::Infeasible(format!(
            "allocation {z:?} is not admissible for {x:?} with n = {n}"
        )));
    }
    let total: u64 = x.iter().sum();
    let d = x.len();
    if total <= n {
        let mut u = vec![0.0; d];
        u[d - 1] = 1.0;
        return Ok(u);
    }
    let excess = (total - n) as f64;
    Ok(x.iter().zip(z).map(|(a, b)| (a - b) as f64 / excess).collect())
}

/// Inverse of [`u_from_z`]: `z = x - (Σx - n)⁺ u`. Requires the queue
/// vector to be integral and bounded by `x`.
pub fn z_from_u(x: &[u64], u: &[f64], n: u64) -> Result<Vec<u64>> {
    if u.len() != x.len() {
        return Err(Error::Infeasible("dimension mismatch".into()));
    }
    check_simplex(u, 1e-9)?;
    let total: u64 = x.iter().sum();
    let excess = total.saturating_sub(n) as f64;
    let mut z = Vec::with_capacity(x.len());
    for (a, w) in x.iter().zip(u) {
        let q = excess * w;
        let qi = q.round();
        if (q - qi).abs() > 1e-6 * (1.0 + q) || qi > *a as f64 {
            return Err(Error::Infeasible(format!(
                "queue split {u:?} does not give an integral queue within {x:?}"
            )));
        }
        z.push(a - qi as u64);
    }
    if !is_admissible(x, &z, n) {
        return Err(Error::Infeasible(format!(
            "queue split {u:?} is not feasible for {x:?}"
        )));
    }
    Ok(z)
}

/// Checks that `u` lies on the probability simplex up to `tol`.
pub fn check_simplex(u: &[f64], tol: f64) -> Result<()> {
    let total: f64 = u.iter().sum();
    if u.iter().any(|v| *v < -tol || !v.is_finite()) || (total - 1.0).abs() > tol {
        return Err(Error::Infeasible(format!("{u:?} is not on the simplex")));
    }
    Ok(())
}

/// Clips negatives and renormalizes, falling back to `e_d` for a degenerate
/// input. Returns the L1 distance moved.
pub fn project_simplex(u: &mut [f64]) -> f64 {
    let before: Vec<f64> = u.to_vec();
    for v in u.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let total: f64 = u.iter().sum();
    let d = u.len();
    if total > 0.0 {
        for v in u.iter_mut() {
            *v /= total;
        }
    } else {
        u.iter_mut().for_each(|v| *v = 0.0);
        u[d - 1] = 1.0;
    }
    before.iter().zip(u.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// Unit vector of the last class.
pub fn last_class(d: usize) -> Vec<f64> {
    let mut u = vec![0.0; d];
    u[d - 1] = 1.0;
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerated_action_sets() {
        let mut a = admissible_actions(&[1, 1], 1).enumerate().unwrap();
        a.sort();
        assert_eq!(a, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(admissible_actions(&[0, 3], 5).enumerate().unwrap(), vec![vec![0, 3]]);
        let mut a = admissible_actions(&[2, 2], 3).enumerate().unwrap();
        a.sort();
        assert_eq!(a, vec![vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn enumeration_cap_gives_predicate_only() {
        let set = admissible_actions(&[600_000, 600_000], 1000);
        assert!(set.enumerate().is_none());
        assert!(set.contains(&[500, 500]));
        assert!(!set.contains(&[500, 499]));
    }

    #[test]
    fn queue_split_examples() {
        assert_eq!(u_from_z(&[3, 4], &[3, 2], 5).unwrap(), vec![0.0, 1.0]);
        assert_eq!(u_from_z(&[1, 2], &[1, 2], 5).unwrap(), vec![0.0, 1.0]);
        assert!(u_from_z(&[3, 4], &[3, 1], 5).is_err());
        assert_eq!(z_from_u(&[3, 4], &[0.5, 0.5], 5).unwrap(), vec![2, 3]);
        assert!(z_from_u(&[3, 4], &[0.3, 0.7], 5).is_err());
    }

    #[test]
    fn projection_onto_simplex() {
        let mut u = [-0.1, 0.3, 0.9];
        let moved = project_simplex(&mut u);
        assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(u[0], 0.0);
        assert!(moved > 0.0);
        let mut u = [0.0, -1.0];
        project_simplex(&mut u);
        assert_eq!(u, [0.0, 1.0]);
    }
}
