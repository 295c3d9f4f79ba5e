use super::{Observation, Policy, PolicyMeta};

/// Fills servers greedily in the given class order:
/// `z_i = x_i ∧ (n - Σ_{j before i} x_j)⁺`.
pub fn static_priority(x: &[u64], n: u64, order: &[usize]) -> Vec<u64> {
    let mut z = vec![0; x.len()];
    static_priority_into(x, n, order, &mut z);
    z
}

fn static_priority_into(x: &[u64], n: u64, order: &[usize], z: &mut [u64]) {
    let mut free = n;
    for &i in order {
        let take = x[i].min(free);
        z[i] = take;
        free -= take;
    }
}

/// Precomputed data for the modified priority rule: the classes without
/// abandonment come first (in index order) and receive server caps
/// proportional to their traffic shares; the remaining classes follow in
/// index order.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorityTables {
    pub n: u64,
    /// Classes with zero abandonment rate.
    pub zero_abandonment: Vec<usize>,
    /// Remaining classes.
    pub others: Vec<usize>,
    /// `⌊nρ_i / Σ_{j without abandonment} ρ_j⌋` for each zero-abandonment class.
    pub caps: Vec<u64>,
}

impl PriorityTables {
    pub fn new(n: u64, rho: &[f64], gamma: &[f64]) -> Self {
        let zero_abandonment: Vec<usize> = (0..rho.len()).filter(|&i| gamma[i] == 0.0).collect();
        let others: Vec<usize> = (0..rho.len()).filter(|&i| gamma[i] != 0.0).collect();
        let share: f64 = zero_abandonment.iter().map(|&i| rho[i]).sum();
        let caps = zero_abandonment
            .iter()
            .map(|&i| (n as f64 * rho[i] / share + 1e-9).floor() as u64)
            .collect();
        PriorityTables {
            n,
            zero_abandonment,
            others,
            caps,
        }
    }

    /// Class order used for surplus trimming and deficit filling.
    pub fn order(&self) -> Vec<usize> {
        self.zero_abandonment.iter().chain(&self.others).copied().collect()
    }

    /// Evaluates the rule into `z`; returns `true` when the final
    /// work-conservation repair had to move servers.
    pub fn allocate_into(&self, x: &[u64], z: &mut [u64]) -> bool {
        let n = self.n as i128;
        let capped: i128 = self
            .zero_abandonment
            .iter()
            .zip(&self.caps)
            .map(|(&j, &c)| x[j].min(c) as i128)
            .sum();
        let mut overflow: i128 = 0;
        for (&i, &cap) in self.zero_abandonment.iter().zip(&self.caps) {
            let spill = (n - capped - overflow).max(0);
            z[i] = ((cap as i128 + spill) as u64).min(x[i]);
            overflow += (x[i] as i128 - cap as i128).max(0);
        }
        let ahead: u64 = self.zero_abandonment.iter().map(|&j| x[j]).sum();
        let mut before = ahead;
        for &i in &self.others {
            let free = self.n.saturating_sub(before);
            z[i] = x[i].min(free);
            before += x[i];
        }
        self.repair(x, z)
    }

    /// Enforces `Σz = Σx ∧ n` by trimming the lowest-priority classes or
    /// filling in priority order.
    fn repair(&self, x: &[u64], z: &mut [u64]) -> bool {
        let target = x.iter().sum::<u64>().min(self.n);
        let mut total: u64 = z.iter().sum();
        if total == target {
            return false;
        }
        let order = self.order();
        if total > target {
            for &i in order.iter().rev() {
                let cut = (total - target).min(z[i]);
                z[i] -= cut;
                total -= cut;
                if total == target {
                    break;
                }
            }
        } else {
            for &i in &order {
                let add = (target - total).min(x[i] - z[i]);
                z[i] += add;
                total += add;
                if total == target {
                    break;
                }
            }
        }
        true
    }
}

/// Modified priority allocation for head counts `x`.
pub fn modified_priority(x: &[u64], n: u64, rho: &[f64], gamma: &[f64]) -> Vec<u64> {
    let mut z = vec![0; x.len()];
    PriorityTables::new(n, rho, gamma).allocate_into(x, &mut z);
    z
}

/// Static priority in a fixed class order.
#[derive(Clone, Debug)]
pub struct StaticPriority {
    pub n: u64,
    pub order: Vec<usize>,
}

impl StaticPriority {
    /// Priority by increasing class index.
    pub fn by_index(n: u64, d: usize) -> Self {
        StaticPriority {
            n,
            order: (0..d).collect(),
        }
    }
}

impl Policy for StaticPriority {
    fn meta(&self) -> PolicyMeta {
        PolicyMeta {
            name: "static_priority".into(),
            requires_priority_order: true,
            requires_control_field: false,
        }
    }

    fn allocate(&self, obs: &Observation<'_>, z: &mut [u64]) {
        static_priority_into(obs.x, self.n, &self.order, z);
    }
}

/// The modified priority rule.
#[derive(Clone, Debug)]
pub struct ModifiedPriority {
    pub tables: PriorityTables,
}

impl ModifiedPriority {
    pub fn new(n: u64, rho: &[f64], gamma: &[f64]) -> Self {
        ModifiedPriority {
            tables: PriorityTables::new(n, rho, gamma),
        }
    }
}

impl Policy for ModifiedPriority {
    fn meta(&self) -> PolicyMeta {
        PolicyMeta {
            name: "modified_priority".into(),
            requires_priority_order: false,
            requires_control_field: false,
        }
    }

    fn allocate(&self, obs: &Observation<'_>, z: &mut [u64]) {
        self.tables.allocate_into(obs.x, z);
    }
}

/// A deliberately unstable rule that never lets class `i` use more than
/// `⌊fraction·nρ_i⌋` servers, leaving the rest idle. It violates work
/// conservation and exists as a negative control for stability checks.
#[derive(Clone, Debug)]
pub struct IdlingPolicy {
    pub caps: Vec<u64>,
}

impl IdlingPolicy {
    pub fn new(n: u64, rho: &[f64], fraction: f64) -> Self {
        IdlingPolicy {
            caps: rho.iter().map(|r| (fraction * n as f64 * r).floor() as u64).collect(),
        }
    }
}

impl Policy for IdlingPolicy {
    fn meta(&self) -> PolicyMeta {
        PolicyMeta {
            name: "idling".into(),
            requires_priority_order: false,
            requires_control_field: false,
        }
    }

    fn allocate(&self, obs: &Observation<'_>, z: &mut [u64]) {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = obs.x[i].min(self.caps[i]);
        }
    }
}
