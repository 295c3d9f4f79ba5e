use super::{ControlField, Observation, Policy, PolicyMeta, PriorityTables};
use crate::queue::SystemParams;

/// Rounds every coordinate but the last down and moves the fractional
/// parts onto the last coordinate, so the total is preserved.
pub fn quantize(y: &[f64]) -> Vec<f64> {
    let d = y.len();
    let mut out: Vec<f64> = y.iter().map(|v| v.floor()).collect();
    let frac: f64 = y.iter().zip(&out).map(|(v, f)| v - f).sum();
    if d > 0 {
        out[d - 1] += frac;
    }
    out
}

/// Markov policy induced by a control field: near the centering point the
/// queue is split as `quantize((Σx - n)⁺ v(x̃))`; elsewhere the modified
/// priority rule applies.
#[derive(Clone, Debug)]
pub struct MarkovControlPolicy {
    pub n: u64,
    pub rho: Vec<f64>,
    pub field: ControlField,
    pub fallback: PriorityTables,
    /// Inner region: `max_i |x̃_i| ≤ √n·min ρ / (2d)`.
    pub inner_radius: f64,
}

pub fn markov_from_control(field: ControlField, params: &SystemParams) -> MarkovControlPolicy {
    MarkovControlPolicy::new(field, params.n, &params.limit.rho, &params.limit.gamma)
}

impl MarkovControlPolicy {
    pub fn new(field: ControlField, n: u64, rho: &[f64], gamma: &[f64]) -> Self {
        let d = rho.len();
        let min_rho = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        MarkovControlPolicy {
            n,
            rho: rho.to_vec(),
            field,
            fallback: PriorityTables::new(n, rho, gamma),
            inner_radius: (n as f64).sqrt() * min_rho / (2.0 * d as f64),
        }
    }

    /// Queue vector inside the inner region, `None` outside.
    pub fn inner_queue(&self, x: &[u64]) -> Option<Vec<u64>> {
        let d = x.len();
        let n = self.n as f64;
        let sn = n.sqrt();
        let scaled: Vec<f64> = x.iter().zip(&self.rho).map(|(v, r)| (*v as f64 - r * n) / sn).collect();
        if scaled.iter().any(|v| v.abs() > self.inner_radius) {
            return None;
        }
        let total: u64 = x.iter().sum();
        let excess = total.saturating_sub(self.n);
        let mut q = vec![0u64; d];
        if excess == 0 {
            return Some(q);
        }
        let mut v = vec![0.0; d];
        self.field.eval_into(&scaled, &mut v);
        let y: Vec<f64> = v.iter().map(|w| excess as f64 * w).collect();
        let cells = quantize(&y);
        let mut assigned = 0u64;
        for i in 0..d - 1 {
            q[i] = (cells[i].max(0.0) as u64).min(x[i]);
            assigned += q[i];
        }
        q[d - 1] = excess - assigned.min(excess);
        // Rounding can only move a unit or so; shift any overflow of the
        // last class back to the others.
        let mut over = q[d - 1].saturating_sub(x[d - 1]);
        q[d - 1] -= over;
        for i in 0..d - 1 {
            let room = x[i] - q[i];
            let add = room.min(over);
            q[i] += add;
            over -= add;
        }
        Some(q)
    }
}

impl Policy for MarkovControlPolicy {
    fn meta(&self) -> PolicyMeta {
        PolicyMeta {
            name: "markov_control".into(),
            requires_priority_order: false,
            requires_control_field: true,
        }
    }

    fn allocate(&self, obs: &Observation<'_>, z: &mut [u64]) {
        match self.inner_queue(obs.x) {
            Some(q) => {
                for i in 0..z.len() {
                    z[i] = obs.x[i] - q[i];
                }
            }
            None => {
                self.fallback.allocate_into(obs.x, z);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{is_admissible, modified_priority, StaticPriority};

    #[test]
    fn quantize_examples() {
        let q = quantize(&[1.3, 2.9]);
        assert_eq!(q[0], 1.0);
        assert!((q[1] - 3.2).abs() < 1e-12);
        assert_eq!(quantize(&[1.5, 2.5]), vec![1.0, 3.0]);
        assert_eq!(quantize(&[2.0, 3.0]), vec![2.0, 3.0]);
    }

    #[test]
    fn hand_evaluated_split() {
        let p = MarkovControlPolicy::new(ControlField::Constant(vec![0.25, 0.75]), 400, &[0.5, 0.5], &[1.0, 1.0]);
        assert_eq!(p.allocate_counts(&[210, 200]), vec![208, 192]);
        assert_eq!(p.allocate_counts(&[190, 200]), vec![190, 200]);
    }

    #[test]
    fn far_states_use_modified_priority() {
        let rho = [0.5, 0.5];
        let gamma = [0.0, 1.0];
        let p = MarkovControlPolicy::new(ControlField::Constant(vec![0.5, 0.5]), 400, &rho, &gamma);
        // Inner radius is √400·0.5/4 = 2.5 in scaled units, i.e. 50 customers.
        let x = [260, 200];
        assert!(p.inner_queue(&x).is_none());
        assert_eq!(p.allocate_counts(&x), modified_priority(&x, 400, &rho, &gamma));
    }

    #[test]
    fn last_class_control_matches_static_priority_inside() {
        let rho = [0.5, 0.5];
        let p = MarkovControlPolicy::new(ControlField::last_class(2), 400, &rho, &[1.0, 1.0]);
        let s = StaticPriority::by_index(400, 2);
        for a in 160..240 {
            for b in 160..240 {
                let x = [a, b];
                let z = p.allocate_counts(&x);
                assert!(is_admissible(&x, &z, 400));
                if p.inner_queue(&x).is_some() {
                    assert_eq!(z, s.allocate_counts(&x));
                }
            }
        }
    }
}
