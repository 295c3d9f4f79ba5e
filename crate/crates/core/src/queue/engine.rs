use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::observe::Observer;
use super::params::SystemParams;
use super::state::{Phase, Snapshot, SystemState};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::rng::RandomStream;

/// Kind of a simulated event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    EnvDown,
    EnvUp,
    Arrival(usize),
    Service(usize),
    Abandon(usize),
}

/// One processed event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// Sequence number of the event; the post-event state carries the same
    /// value in [`SystemState::events`].
    pub index: u64,
}

/// Counters and boundary snapshots of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub start: f64,
    pub end: f64,
    pub events: u64,
    pub arrivals: Vec<u64>,
    pub services: Vec<u64>,
    pub abandonments: Vec<u64>,
    pub env_down: u64,
    pub env_up: u64,
    /// Service completions processed while the environment was down.
    pub services_while_down: u64,
    pub initial: Snapshot,
    pub last: Snapshot,
}

impl TrajectoryStats {
    fn new(state: &SystemState) -> Self {
        let d = state.d();
        TrajectoryStats {
            start: state.t,
            end: state.t,
            events: 0,
            arrivals: vec![0; d],
            services: vec![0; d],
            abandonments: vec![0; d],
            env_down: 0,
            env_up: 0,
            services_while_down: 0,
            initial: state.snapshot(),
            last: state.snapshot(),
        }
    }
}

/// Initial condition with explicit ages and environment phase.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub x: Vec<u64>,
    /// Ages of the in-progress interarrival times.
    pub ages: Vec<f64>,
    pub phase: Phase,
    /// Age of the current downtime (ignored while up).
    pub downtime_age: f64,
}

impl InitialCondition {
    /// Up phase, all ages zero.
    pub fn fresh(x: &[u64]) -> Self {
        InitialCondition {
            x: x.to_vec(),
            ages: vec![0.0; x.len()],
            phase: Phase::Up,
            downtime_age: 0.0,
        }
    }
}

/// Discrete-event simulator of one system under one policy.
///
/// Service completions and abandonments race as one aggregated exponential
/// clock, resampled after every event; each class keeps one pending renewal
/// arrival; the environment keeps its next switching time. Simultaneous
/// scheduled events resolve in the order environment, arrivals by class
/// index, then the exponential race.
pub struct Engine<'a> {
    pub params: &'a SystemParams,
    pub policy: &'a dyn Policy,
}

impl<'a> Engine<'a> {
    pub fn new(params: &'a SystemParams, policy: &'a dyn Policy) -> Self {
        Engine { params, policy }
    }

    /// State at time 0: phase up, all ages zero.
    pub fn build(&self, x0: &[u64], rng: &mut RandomStream) -> Result<SystemState> {
        self.build_at(&InitialCondition::fresh(x0), rng)
    }

    /// State at time 0 with the given ages and phase. Pending clocks are
    /// drawn from the residual-life laws at those ages.
    pub fn build_at(&self, init: &InitialCondition, rng: &mut RandomStream) -> Result<SystemState> {
        self.params.validate()?;
        let d = self.params.d();
        if init.x.len() != d || init.ages.len() != d {
            return Err(Error::Validation(vec![format!(
                "initial condition has {} classes, system has {d}",
                init.x.len()
            )]));
        }
        if init.ages.iter().any(|a| !(*a >= 0.0)) || !(init.downtime_age >= 0.0) {
            return Err(Error::Validation(vec!["initial ages must be nonnegative".into()]));
        }
        let mut last_arrival = vec![0.0; d];
        let mut next_arrival = vec![f64::INFINITY; d];
        for (i, c) in self.params.classes.iter().enumerate() {
            last_arrival[i] = -init.ages[i];
            if c.arrival_rate > 0.0 {
                let residual = c.interarrival.sample_residual(rng, c.arrival_rate * init.ages[i]);
                next_arrival[i] = residual / c.arrival_rate;
            }
        }
        let (phase, phase_start, next_switch) = match (&self.params.environment, init.phase) {
            (None, Phase::Down) => {
                return Err(Error::Validation(vec![
                    "down phase requested for a system without interruptions".into(),
                ]))
            }
            (None, Phase::Up) => (Phase::Up, 0.0, f64::INFINITY),
            (Some(env), Phase::Up) => {
                let e: f64 = Exp1.sample(rng);
                (Phase::Up, 0.0, e / env.up_rate)
            }
            (Some(env), Phase::Down) => {
                let r = env.downtime.sample_residual(rng, init.downtime_age);
                (Phase::Down, -init.downtime_age, r)
            }
        };
        let down_before = if phase == Phase::Down { -init.downtime_age } else { 0.0 };
        let mut state = SystemState {
            t: 0.0,
            x: init.x.clone(),
            z: vec![0; d],
            q: init.x.clone(),
            phase,
            last_arrival,
            next_arrival,
            phase_start,
            next_switch,
            down_before,
            events: 0,
        };
        self.reallocate(&mut state);
        Ok(state)
    }

    fn reallocate(&self, state: &mut SystemState) {
        let mut z = std::mem::take(&mut state.z);
        self.policy.allocate(&state.observation(), &mut z);
        state.z = z;
        let mut busy = 0u64;
        for i in 0..state.d() {
            assert!(
                state.z[i] <= state.x[i],
                "policy {} assigned {} servers to class {} with {} customers",
                self.policy.meta().name,
                state.z[i],
                i + 1,
                state.x[i]
            );
            state.q[i] = state.x[i] - state.z[i];
            busy += state.z[i];
        }
        assert!(
            busy <= self.params.n,
            "policy {} used {busy} of {} servers",
            self.policy.meta().name,
            self.params.n
        );
    }

    /// Time and kind of the next event; consumes randomness for the
    /// exponential race.
    pub fn next_event(&self, state: &SystemState, rng: &mut RandomStream) -> (f64, Option<EventKind>) {
        let mut best_t = f64::INFINITY;
        let mut best = None;
        if state.next_switch < best_t {
            best_t = state.next_switch;
            best = Some(match state.phase {
                Phase::Up => EventKind::EnvDown,
                Phase::Down => EventKind::EnvUp,
            });
        }
        for (i, &ta) in state.next_arrival.iter().enumerate() {
            if ta < best_t {
                best_t = ta;
                best = Some(EventKind::Arrival(i));
            }
        }
        let up = state.phase == Phase::Up;
        let mut total = 0.0;
        for (i, c) in self.params.classes.iter().enumerate() {
            if up {
                total += c.service_rate * state.z[i] as f64;
            }
            total += c.abandonment_rate * state.q[i] as f64;
        }
        if total > 0.0 {
            let e: f64 = Exp1.sample(rng);
            let te = state.t + e / total;
            if te < best_t {
                best_t = te;
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = None;
                for (i, c) in self.params.classes.iter().enumerate() {
                    if up {
                        let r = c.service_rate * state.z[i] as f64;
                        if pick < r {
                            chosen = Some(EventKind::Service(i));
                            break;
                        }
                        pick -= r;
                    }
                    let r = c.abandonment_rate * state.q[i] as f64;
                    if pick < r {
                        chosen = Some(EventKind::Abandon(i));
                        break;
                    }
                    pick -= r;
                }
                best = Some(chosen.unwrap_or_else(|| self.last_positive_clock(state)));
            }
        }
        (best_t, best)
    }

    /// Fallback for the exponential race when rounding leaves the uniform
    /// pick just past the last positive rate.
    fn last_positive_clock(&self, state: &SystemState) -> EventKind {
        let up = state.phase == Phase::Up;
        for (i, c) in self.params.classes.iter().enumerate().rev() {
            if c.abandonment_rate > 0.0 && state.q[i] > 0 {
                return EventKind::Abandon(i);
            }
            if up && state.z[i] > 0 {
                return EventKind::Service(i);
            }
        }
        unreachable!("exponential race with zero total rate")
    }

    /// Advances the state to `time` and applies `kind`.
    pub fn apply(&self, state: &mut SystemState, time: f64, kind: EventKind, rng: &mut RandomStream) -> EventRecord {
        debug_assert!(time >= state.t);
        state.t = time;
        match kind {
            EventKind::Arrival(i) => {
                let c = &self.params.classes[i];
                state.x[i] += 1;
                state.q[i] += 1;
                state.last_arrival[i] = time;
                state.next_arrival[i] = time + c.interarrival.sample(rng) / c.arrival_rate;
            }
            EventKind::Service(i) => {
                assert!(
                    state.z[i] > 0,
                    "service completion in class {} with nobody in service",
                    i + 1
                );
                state.x[i] -= 1;
                state.z[i] -= 1;
            }
            EventKind::Abandon(i) => {
                assert!(state.q[i] > 0, "abandonment in class {} with an empty queue", i + 1);
                state.x[i] -= 1;
                state.q[i] -= 1;
            }
            EventKind::EnvDown => {
                let env = self
                    .params
                    .environment
                    .as_ref()
                    .expect("environment event without environment");
                state.phase = Phase::Down;
                state.phase_start = time;
                state.next_switch = time + env.downtime.sample(rng);
            }
            EventKind::EnvUp => {
                let env = self
                    .params
                    .environment
                    .as_ref()
                    .expect("environment event without environment");
                state.down_before += time - state.phase_start;
                state.phase = Phase::Up;
                state.phase_start = time;
                let e: f64 = Exp1.sample(rng);
                state.next_switch = time + e / env.up_rate;
            }
        }
        self.reallocate(state);
        state.events += 1;
        EventRecord {
            time,
            kind,
            index: state.events,
        }
    }

    /// Processes the next event; `None` when no event can ever occur.
    pub fn step(&self, state: &mut SystemState, rng: &mut RandomStream) -> Option<EventRecord> {
        let (t, kind) = self.next_event(state, rng);
        kind.map(|k| self.apply(state, t, k, rng))
    }

    /// Simulates until `horizon`, feeding observers with every holding
    /// interval and event. Leaves the state at time `horizon`.
    pub fn run(
        &self,
        state: &mut SystemState,
        horizon: f64,
        rng: &mut RandomStream,
        observers: &mut [&mut dyn Observer],
    ) -> TrajectoryStats {
        let mut stats = TrajectoryStats::new(state);
        loop {
            let (t, kind) = self.next_event(state, rng);
            let kind = match kind {
                Some(k) if t <= horizon => k,
                _ => {
                    if horizon > state.t {
                        for o in observers.iter_mut() {
                            o.hold(state, state.t, horizon);
                        }
                        state.t = horizon;
                    }
                    break;
                }
            };
            for o in observers.iter_mut() {
                o.hold(state, state.t, t);
            }
            let was_down = state.phase == Phase::Down;
            let rec = self.apply(state, t, kind, rng);
            stats.events += 1;
            match kind {
                EventKind::Arrival(i) => stats.arrivals[i] += 1,
                EventKind::Service(i) => {
                    stats.services[i] += 1;
                    if was_down {
                        stats.services_while_down += 1;
                    }
                }
                EventKind::Abandon(i) => stats.abandonments[i] += 1,
                EventKind::EnvDown => stats.env_down += 1,
                EventKind::EnvUp => stats.env_up += 1,
            }
            for o in observers.iter_mut() {
                o.event(&rec, state);
            }
        }
        for o in observers.iter_mut() {
            o.finish(state);
        }
        stats.end = state.t;
        stats.last = state.snapshot();
        stats
    }
}
