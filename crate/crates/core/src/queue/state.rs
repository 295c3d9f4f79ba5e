use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::io::write_csv_rows;
use crate::policy::Observation;

/// Environment phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Up,
    Down,
}

/// Full Markovian state of the n-th system, including the pending clocks.
#[derive(Clone, Debug)]
pub struct SystemState {
    pub t: f64,
    /// Head counts per class.
    pub x: Vec<u64>,
    /// Customers in service per class.
    pub z: Vec<u64>,
    /// Customers waiting per class.
    pub q: Vec<u64>,
    pub phase: Phase,
    pub(crate) last_arrival: Vec<f64>,
    pub(crate) next_arrival: Vec<f64>,
    pub(crate) phase_start: f64,
    pub(crate) next_switch: f64,
    pub(crate) down_before: f64,
    /// Number of events processed so far.
    pub events: u64,
}

impl SystemState {
    pub fn d(&self) -> usize {
        self.x.len()
    }

    /// Age of the in-progress interarrival time of class `i`.
    pub fn age(&self, i: usize) -> f64 {
        self.t - self.last_arrival[i]
    }

    pub fn ages(&self) -> Vec<f64> {
        (0..self.d()).map(|i| self.age(i)).collect()
    }

    /// Age of the current downtime, zero while up.
    pub fn downtime_age(&self) -> f64 {
        self.downtime_age_at(self.t)
    }

    fn downtime_age_at(&self, t: f64) -> f64 {
        match self.phase {
            Phase::Up => 0.0,
            Phase::Down => t - self.phase_start,
        }
    }

    /// Remaining duration of the current downtime, zero while up.
    pub fn residual_downtime(&self) -> f64 {
        match self.phase {
            Phase::Up => 0.0,
            Phase::Down => self.next_switch - self.t,
        }
    }

    /// Cumulative downtime up to the current time.
    pub fn cum_down(&self) -> f64 {
        self.cum_down_at(self.t)
    }

    fn cum_down_at(&self, t: f64) -> f64 {
        self.down_before + self.downtime_age_at(t)
    }

    pub fn total(&self) -> u64 {
        self.x.iter().sum()
    }

    /// What a policy sees.
    pub fn observation(&self) -> Observation<'_> {
        Observation {
            x: &self.x,
            t: self.t,
            last_arrival: &self.last_arrival,
            up: self.phase == Phase::Up,
            k: self.downtime_age(),
        }
    }

    /// Snapshot of the state held at time `t` (no event between `self.t`
    /// and `t`).
    pub fn snapshot_at(&self, t: f64) -> Snapshot {
        Snapshot {
            t,
            x: self.x.clone(),
            q: self.q.clone(),
            z: self.z.clone(),
            phase: self.phase,
            k: self.downtime_age_at(t),
            residual: match self.phase {
                Phase::Up => 0.0,
                Phase::Down => self.next_switch - t,
            },
            cum_down: self.cum_down_at(t),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot_at(self.t)
    }
}

/// A recorded state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<u64>,
    pub q: Vec<u64>,
    pub z: Vec<u64>,
    pub phase: Phase,
    pub k: f64,
    pub residual: f64,
    pub cum_down: f64,
}

/// Writes snapshots as CSV: `t, x_1..x_d, q_1..q_d, z_1..z_d, psi, k, cum_down`
/// with `psi = 1` for up and `0` for down.
pub fn write_snapshots_csv<W: Write>(out: W, snaps: &[Snapshot]) -> Result<()> {
    let d = snaps.first().map(|s| s.x.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for prefix in ["x", "q", "z"] {
        header.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    }
    header.extend(["psi".into(), "k".into(), "cum_down".into()]);
    let rows = snaps.iter().map(|s| {
        let mut row = vec![s.t.to_string()];
        row.extend(s.x.iter().chain(&s.q).chain(&s.z).map(|v| v.to_string()));
        row.push(if s.phase == Phase::Up { "1" } else { "0" }.into());
        row.push(s.k.to_string());
        row.push(s.cum_down.to_string());
        row
    });
    write_csv_rows(out, &header, rows)
}
