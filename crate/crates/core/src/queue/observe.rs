use super::state::{Snapshot, SystemState};
use super::EventRecord;
use crate::error::Result;
use crate::stats::{BatchAccumulator, Estimate};

/// Receives the piecewise-constant trajectory of a run.
pub trait Observer {
    /// The state is held unchanged on `[from, to)`.
    fn hold(&mut self, _state: &SystemState, _from: f64, _to: f64) {}
    /// Called after an event has been applied.
    fn event(&mut self, _record: &EventRecord, _state: &SystemState) {}
    /// Called once when the run reaches its horizon.
    fn finish(&mut self, _state: &SystemState) {}
}

/// Records snapshots at fixed epochs.
#[derive(Clone, Debug, Default)]
pub struct SnapshotRecorder {
    epochs: Vec<f64>,
    next: usize,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotRecorder {
    pub fn new(mut epochs: Vec<f64>) -> Self {
        epochs.sort_by(f64::total_cmp);
        SnapshotRecorder {
            epochs,
            next: 0,
            snapshots: Vec::new(),
        }
    }

    /// Epochs `0, every, 2·every, …` up to `horizon`.
    pub fn every(every: f64, horizon: f64) -> Self {
        let k = (horizon / every).floor() as usize;
        Self::new((0..=k).map(|i| i as f64 * every).collect())
    }
}

impl Observer for SnapshotRecorder {
    fn hold(&mut self, state: &SystemState, from: f64, to: f64) {
        while self.next < self.epochs.len() && self.epochs[self.next] < to {
            let e = self.epochs[self.next];
            if e >= from {
                self.snapshots.push(state.snapshot_at(e));
            }
            self.next += 1;
        }
    }

    fn finish(&mut self, state: &SystemState) {
        while self.next < self.epochs.len() && self.epochs[self.next] <= state.t {
            self.snapshots.push(state.snapshot_at(self.epochs[self.next]));
            self.next += 1;
        }
    }
}

/// Time average of a function of the counts over `[burn_in, horizon)`,
/// split into batches.
pub struct TimeAverage<F: FnMut(&SystemState) -> f64> {
    f: F,
    acc: BatchAccumulator,
}

impl<F: FnMut(&SystemState) -> f64> TimeAverage<F> {
    pub fn new(f: F, burn_in: f64, horizon: f64, batches: usize) -> Self {
        TimeAverage {
            f,
            acc: BatchAccumulator::new(burn_in, horizon, batches),
        }
    }

    pub fn batch_means(&self) -> Vec<f64> {
        self.acc.batch_means()
    }

    pub fn mean(&self) -> f64 {
        let b = self.acc.batch_means();
        b.iter().sum::<f64>() / b.len() as f64
    }

    pub fn estimate(&self) -> Result<Estimate> {
        self.acc.estimate()
    }
}

impl<F: FnMut(&SystemState) -> f64> Observer for TimeAverage<F> {
    fn hold(&mut self, state: &SystemState, from: f64, to: f64) {
        let v = (self.f)(state);
        self.acc.add(from, to, v);
    }
}

/// Time spent at each level of a count-valued function after `burn_in`.
pub struct Occupancy<F: FnMut(&SystemState) -> u64> {
    f: F,
    burn_in: f64,
    pub time: Vec<f64>,
}

impl<F: FnMut(&SystemState) -> u64> Occupancy<F> {
    pub fn new(f: F, burn_in: f64) -> Self {
        Occupancy {
            f,
            burn_in,
            time: Vec::new(),
        }
    }

    /// Fraction of time at each level.
    pub fn distribution(&self) -> Vec<f64> {
        let total: f64 = self.time.iter().sum();
        self.time.iter().map(|t| t / total).collect()
    }
}

impl<F: FnMut(&SystemState) -> u64> Observer for Occupancy<F> {
    fn hold(&mut self, state: &SystemState, from: f64, to: f64) {
        let a = from.max(self.burn_in);
        if to <= a {
            return;
        }
        let level = (self.f)(state) as usize;
        if level >= self.time.len() {
            self.time.resize(level + 1, 0.0);
        }
        self.time[level] += to - a;
    }
}

/// Path of `√n·C_d(t)` from recorded snapshots.
pub fn downtime_scaled(snapshots: &[Snapshot], n: u64) -> Vec<(f64, f64)> {
    let s = (n as f64).sqrt();
    snapshots.iter().map(|p| (p.t, s * p.cum_down)).collect()
}
