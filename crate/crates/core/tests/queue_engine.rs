mod common;

use common::{birth_death_stationary, ks_statistic, poisson_pmf, total_variation};
use qedlab::policy::{is_admissible, ModifiedPriority, Policy, StaticPriority};
use qedlab::queue::{
    diffusion_scale, downtime_scaled, residual_augmented, unscale, ClassParams, Engine, EventKind, EventRecord,
    HalfinWhittSpec, LimitData, Observer, Occupancy, Phase, SnapshotRecorder, SystemParams, SystemState, TimeAverage,
};
use qedlab::renewal::{RenewalDist, RenewalSpec};
use qedlab::rng::stream;

/// Single-class M/M/5+M with λ = 4 and μ = γ = 1.
fn mm5() -> SystemParams {
    SystemParams::new(
        5,
        vec![ClassParams {
            arrival_rate: 4.0,
            service_rate: 1.0,
            abandonment_rate: 1.0,
            interarrival: RenewalDist::exponential(),
        }],
        None,
        LimitData {
            lambda: vec![1.0],
            mu: vec![1.0],
            gamma: vec![1.0],
            rho: vec![1.0],
            ell: vec![0.0],
            beta: 0.0,
            theta: 1.0,
            scv: vec![1.0],
        },
    )
    .unwrap()
}

#[test]
fn build_examples() {
    let p = mm5();
    let policy = StaticPriority::by_index(5, 1);
    let engine = Engine::new(&p, &policy);
    let s = engine.build(&[4], &mut stream(1, 0)).unwrap();
    assert_eq!((s.x[0], s.z[0], s.q[0]), (4, 4, 0));
    assert_eq!(s.phase, Phase::Up);
    assert_eq!(s.downtime_age(), 0.0);

    let spec = HalfinWhittSpec::poisson(&[(0.5, 1.0, 1.0), (0.5, 1.0, 1.0)]);
    let mut p2 = spec.at(5).unwrap();
    let policy = StaticPriority::by_index(5, 2);
    let s = Engine::new(&p2, &policy).build(&[3, 4], &mut stream(1, 0)).unwrap();
    assert_eq!(s.z, vec![3, 2]);
    assert_eq!(s.q, vec![0, 2]);

    p2.limit.rho = vec![0.45, 0.45];
    assert!(Engine::new(&p2, &policy).build(&[3, 4], &mut stream(1, 0)).is_err());
}

#[test]
fn birth_death_oracle_for_mm5() {
    let p = mm5();
    let policy = StaticPriority::by_index(5, 1);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(11, 0);
    let mut s = engine.build(&[4], &mut rng).unwrap();
    let mut occ = Occupancy::new(|s: &SystemState| s.x[0], 100.0);
    let mut events = 0u64;
    while events < 1_000_000 {
        let until = s.t + 1000.0;
        let stats = engine.run(&mut s, until, &mut rng, &mut [&mut occ]);
        events += stats.events;
    }
    let empirical = occ.distribution();
    let oracle = birth_death_stationary(40, |_| 4.0, |k| (k.min(5) + k.saturating_sub(5)) as f64);
    let poisson = poisson_pmf(4.0, 40);
    assert!(total_variation(&oracle, &poisson) < 1e-12);
    let tv = total_variation(&empirical[..empirical.len().min(21)], &oracle[..21]);
    assert!(tv <= 0.02, "total variation {tv}");
}

#[test]
fn long_run_mean_of_mm5() {
    let p = mm5();
    let policy = StaticPriority::by_index(5, 1);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(5, 0);
    let mut s = engine.build(&[0], &mut rng).unwrap();
    let mut avg = TimeAverage::new(|s: &SystemState| s.x[0] as f64, 1000.0, 10_000.0, 20);
    engine.run(&mut s, 10_000.0, &mut rng, &mut [&mut avg]);
    assert!((avg.mean() - 4.0).abs() <= 0.04, "mean {}", avg.mean());
}

#[test]
fn trivial_runs() {
    let p = mm5();
    let policy = StaticPriority::by_index(5, 1);
    let engine = Engine::new(&p, &policy);
    let mut s = engine.build(&[2], &mut stream(1, 0)).unwrap();
    let stats = engine.run(&mut s, 0.0, &mut stream(1, 1), &mut []);
    assert_eq!(stats.events, 0);
    assert_eq!(stats.initial, stats.last);

    let mut idle = mm5();
    idle.classes[0].arrival_rate = 0.0;
    let engine = Engine::new(&idle, &policy);
    let mut s = engine.build(&[0], &mut stream(1, 0)).unwrap();
    let mut rec = SnapshotRecorder::every(1.0, 50.0);
    let stats = engine.run(&mut s, 50.0, &mut stream(1, 1), &mut [&mut rec]);
    assert_eq!(stats.events, 0);
    assert_eq!(rec.snapshots.len(), 51);
    assert!(rec.snapshots.iter().all(|s| s.x == vec![0]));
}

/// Counts services while down and checks the state invariants after every
/// event.
#[derive(Default)]
struct Audit {
    services_down: u64,
    events: u64,
    last_time: f64,
    n: u64,
    policy_checks: bool,
    up_durations: Vec<f64>,
    down_durations: Vec<f64>,
    switch_time: f64,
}

impl Observer for Audit {
    fn event(&mut self, rec: &EventRecord, s: &SystemState) {
        assert!(rec.time >= self.last_time);
        self.last_time = rec.time;
        self.events += 1;
        for i in 0..s.d() {
            assert_eq!(s.x[i], s.q[i] + s.z[i]);
        }
        assert!(s.z.iter().sum::<u64>() <= self.n);
        if self.policy_checks {
            assert!(is_admissible(&s.x, &s.z, self.n));
        }
        if s.phase == Phase::Up {
            assert_eq!(s.downtime_age(), 0.0);
        }
        match rec.kind {
            EventKind::Service(_) if s.phase == Phase::Down => self.services_down += 1,
            EventKind::Arrival(i) => assert_eq!(s.age(i), 0.0),
            EventKind::EnvDown => {
                self.up_durations.push(rec.time - self.switch_time);
                self.switch_time = rec.time;
            }
            EventKind::EnvUp => {
                assert_eq!(s.downtime_age(), 0.0);
                self.down_durations.push(rec.time - self.switch_time);
                self.switch_time = rec.time;
            }
            _ => {}
        }
    }
}

#[test]
fn environment_alternation_and_frozen_service() {
    let spec = HalfinWhittSpec::poisson(&[(0.5, 1.0, 0.0), (1.0, 2.0, 1.0)]).with_environment(
        2.0,
        1.0,
        RenewalSpec::Erlang { k: 2, rate: None },
    );
    let p = spec.at(100).unwrap();
    let policy = ModifiedPriority::new(100, &p.limit.rho, &p.limit.gamma);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(3, 0);
    let mut s = engine.build(&[50, 50], &mut rng).unwrap();
    let mut audit = Audit {
        n: 100,
        policy_checks: true,
        ..Default::default()
    };
    let stats = engine.run(&mut s, 5_000.0, &mut rng, &mut [&mut audit]);
    assert_eq!(stats.services_while_down, 0);
    assert_eq!(audit.services_down, 0);
    assert!(audit.up_durations.len() > 8_000, "{} cycles", audit.up_durations.len());
    let ks_up = ks_statistic(&mut audit.up_durations, |t| 1.0 - (-2.0 * t).exp());
    assert!(ks_up <= 0.02, "up KS {ks_up}");
    let base = RenewalDist::erlang(2).unwrap();
    let ks_down = ks_statistic(&mut audit.down_durations, |t| base.cdf(10.0 * t));
    assert!(ks_down <= 0.02, "down KS {ks_down}");
}

#[test]
fn renewal_arrivals_reset_ages() {
    let mut spec = HalfinWhittSpec::poisson(&[(1.0, 1.0, 1.0)]);
    spec.classes[0].interarrival = RenewalSpec::HyperexponentialScv { scv: 2.0 };
    let p = spec.at(50).unwrap();
    let policy = StaticPriority::by_index(50, 1);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(9, 0);
    let mut s = engine.build(&[50], &mut rng).unwrap();
    let mut audit = Audit {
        n: 50,
        policy_checks: true,
        ..Default::default()
    };
    engine.run(&mut s, 200.0, &mut rng, &mut [&mut audit]);
    assert!(audit.events > 10_000);
}

#[test]
fn scaling_transforms() {
    let spec = HalfinWhittSpec::poisson(&[(0.5, 1.0, 1.0), (0.5, 1.0, 1.0)]);
    let p = spec.at(100).unwrap();
    assert_eq!(diffusion_scale(&p, &[50, 50]), vec![0.0, 0.0]);
    assert_eq!(diffusion_scale(&p, &[60, 40]), vec![1.0, -1.0]);
    for x in [[0u64, 0], [13, 97], [60, 40]] {
        assert_eq!(unscale(&p, &diffusion_scale(&p, &x)), x.to_vec());
    }
}

#[test]
fn residual_augmentation() {
    let spec = HalfinWhittSpec::poisson(&[(0.5, 1.0, 1.0), (0.5, 1.0, 1.0)]).with_environment(
        1.0,
        1.0,
        RenewalSpec::default(),
    );
    let p = spec.at(100).unwrap();
    let policy = StaticPriority::by_index(100, 2);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(2, 0);
    let mut s = engine.build(&[50, 50], &mut rng).unwrap();
    assert_eq!(residual_augmented(&p, &s), vec![50.0, 50.0]);
    // Step until the first downtime and compare against the definition.
    loop {
        let rec = engine.step(&mut s, &mut rng).unwrap();
        if rec.kind == EventKind::EnvDown {
            break;
        }
    }
    let r = s.residual_downtime();
    assert!(r > 0.0);
    let aug = residual_augmented(&p, &s);
    for i in 0..2 {
        let expect = s.x[i] as f64 + 100.0 * 1.0 * 0.5 * r;
        assert!((aug[i] - expect).abs() < 1e-12);
    }
}

#[test]
fn scaled_downtime_has_compound_poisson_mean() {
    // β = 1, exponential d₁, θ = 1 at n = 10⁴: √n C_d(50) has mean 50.
    let spec = HalfinWhittSpec::poisson(&[(1.0, 1.0, 1.0)]).with_environment(1.0, 1.0, RenewalSpec::default());
    let mut p = spec.at(10_000).unwrap();
    p.classes[0].arrival_rate = 0.0;
    let policy = StaticPriority::by_index(p.n, 1);
    let engine = Engine::new(&p, &policy);
    let reps = 400;
    let mut total = 0.0;
    for r in 0..reps {
        let mut rng = stream(21, r);
        let mut s = engine.build(&[0], &mut rng).unwrap();
        let mut rec = SnapshotRecorder::new(vec![0.0, 50.0]);
        engine.run(&mut s, 50.0, &mut rng, &mut [&mut rec]);
        let path = downtime_scaled(&rec.snapshots, p.n);
        assert_eq!(path[0].1, 0.0);
        total += path[1].1;
    }
    let mean = total / reps as f64;
    // Standard deviation of √n C_d(50) is √(2·50) = 10; 400 reps give SE 0.5.
    assert!((mean - 50.0).abs() < 2.5, "mean {mean}");
}

#[test]
fn no_downtime_without_down_periods() {
    let p = mm5();
    let policy = StaticPriority::by_index(5, 1);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(4, 0);
    let mut s = engine.build(&[3], &mut rng).unwrap();
    let mut rec = SnapshotRecorder::every(5.0, 100.0);
    engine.run(&mut s, 100.0, &mut rng, &mut [&mut rec]);
    assert!(downtime_scaled(&rec.snapshots, 5).iter().all(|(_, v)| *v == 0.0));
}

#[test]
fn runs_are_reproducible() {
    let spec = HalfinWhittSpec::poisson(&[(0.5, 1.0, 0.5), (1.0, 2.0, 1.0)]).with_environment(
        0.5,
        1.0,
        RenewalSpec::default(),
    );
    let p = spec.at(100).unwrap();
    let policy = ModifiedPriority::new(100, &p.limit.rho, &p.limit.gamma);
    let engine = Engine::new(&p, &policy);
    let run = |seed| {
        let mut rng = stream(seed, 0);
        let mut s = engine.build(&[55, 50], &mut rng).unwrap();
        engine.run(&mut s, 100.0, &mut rng, &mut [])
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1).last, run(2).last);
    let _ = policy.meta();
}
