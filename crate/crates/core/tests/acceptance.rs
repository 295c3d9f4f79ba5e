//! Acceptance suite: one pass/fail line per criterion. Runs as a plain
//! binary so the lines are always shown.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::{birth_death_stationary, poisson_pmf, total_variation};
use qedlab::experiments::*;
use qedlab::policy::{
    is_admissible, modified_priority, quantize, static_priority, u_from_z, z_from_u, ControlField, MarkovControlPolicy,
    Policy,
};
use qedlab::queue::{ClassParams, Engine, LimitData, Occupancy, SystemParams, SystemState};
use qedlab::renewal::RenewalDist;
use qedlab::rng::stream;
use rand::Rng;

struct Line {
    passed: bool,
}

fn report(id: u32, name: &str, passed: bool, elapsed: Duration, budget: Option<Duration>, detail: String) -> Line {
    let in_time = budget.is_none_or(|b| elapsed < b);
    let passed = passed && in_time;
    let budget = budget
        .map(|b| format!(" (budget {} s)", b.as_secs()))
        .unwrap_or_default();
    println!(
        "[{}] {id:>2} {name}: {detail}; {:.1} s{budget}",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    Line { passed }
}

fn config(text: &str) -> ExperimentConfig {
    let cfg = ExperimentConfig::from_toml(text).expect("acceptance config parses");
    cfg.validate(Path::new(".")).expect("acceptance config is valid");
    cfg
}

fn check_line(checks: &[Check]) -> (bool, String) {
    let passed = checks.iter().all(|c| c.passed);
    let detail = checks
        .iter()
        .map(|c| {
            format!(
                "{} {}",
                c.name,
                if c.detail.is_empty() {
                    "ok".into()
                } else {
                    c.detail.clone()
                }
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (passed, detail)
}

fn identities() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/identity_suite.toml"));
    let out = run_identity_suite(cfg.identity_suite.as_ref().unwrap()).unwrap();
    let (passed, detail) = check_line(&out.report().checks);
    report(
        1,
        "renewal identities",
        passed,
        t.elapsed(),
        Some(Duration::from_secs(1)),
        detail,
    )
}

fn birth_death() -> Line {
    let t = Instant::now();
    let p = SystemParams::new(
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
    .unwrap();
    let policy = qedlab::policy::StaticPriority::by_index(5, 1);
    let engine = Engine::new(&p, &policy);
    let mut rng = stream(2, 0);
    let mut s = engine.build(&[0], &mut rng).unwrap();
    let mut occ = Occupancy::new(|s: &SystemState| s.x[0], 0.0);
    let mut events = 0u64;
    while events < 1_000_000 {
        let until = s.t + 100.0;
        events += engine.run(&mut s, until, &mut rng, &mut [&mut occ]).events;
    }
    let empirical = occ.distribution();
    let oracle = birth_death_stationary(40, |_| 4.0, |k| k as f64);
    let poisson = poisson_pmf(4.0, 40);
    let oracle_gap = total_variation(&oracle, &poisson);
    let tv = total_variation(&empirical[..empirical.len().min(21)], &poisson[..21]);
    report(
        2,
        "birth-death oracle",
        tv <= 0.02 && oracle_gap < 1e-12,
        t.elapsed(),
        Some(Duration::from_secs(30)),
        format!("total variation to Poisson(4) on 0..=20 is {tv:.4} (limit 0.02) after {events} events"),
    )
}

fn compound_poisson() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/cp_limit.toml"));
    let out = run_cp_limit(cfg.cp_limit.as_ref().unwrap(), cfg.seed).unwrap();
    let (passed, detail) = check_line(&out.report().checks);
    let detail = format!(
        "{detail}; rates {:.4}/{:.4} vs {:.4}/{:.4} from {} unit increments",
        out.mean_rate, out.var_rate, out.target_mean, out.target_var, out.increments
    );
    report(
        3,
        "compound Poisson downtime limit",
        passed,
        t.elapsed(),
        Some(Duration::from_secs(120)),
        detail,
    )
}

/// Stationary mean and variance of the scaled head count of the d = 1
/// birth-death chain, and of the limit diffusion from its density.
fn scaling_oracles(ns: &[u64]) -> (Vec<(f64, f64)>, (f64, f64)) {
    let queue = ns
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let sn = nf.sqrt();
            let lam = nf - sn;
            let max = (nf + 12.0 * sn) as usize;
            let death = |k: usize| k.min(n as usize) as f64 + 0.5 * k.saturating_sub(n as usize) as f64;
            // Log weights: the plain product overflows for large n.
            let mut logw = vec![0.0f64; max + 1];
            for k in 1..=max {
                logw[k] = logw[k - 1] + (lam / death(k)).ln();
            }
            let top = logw.iter().cloned().fold(f64::MIN, f64::max);
            let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
            let z: f64 = w.iter().sum();
            let law: Vec<f64> = w.iter().map(|v| v / z).collect();
            let xs: Vec<f64> = (0..=max).map(|k| (k as f64 - nf) / sn).collect();
            let m: f64 = law.iter().zip(&xs).map(|(w, x)| w * x).sum();
            let v: f64 = law.iter().zip(&xs).map(|(w, x)| w * (x - m).powi(2)).sum();
            (m, v)
        })
        .collect();
    // Density ∝ exp(∫ 2b/σ²) with b = -1 - x + 0.5 x⁺ and σ² = 2.
    let potential = |x: f64| if x < 0.0 { -x - 0.5 * x * x } else { -x - 0.25 * x * x };
    let h = 1e-3;
    let grid: Vec<f64> = (0..=30_000).map(|i| -15.0 + h * i as f64).collect();
    let w: Vec<f64> = grid.iter().map(|x| potential(*x).exp()).collect();
    let z: f64 = w.iter().sum();
    let m: f64 = grid.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / z;
    let v: f64 = grid.iter().zip(&w).map(|(x, w)| (x - m).powi(2) * w).sum::<f64>() / z;
    (queue, (m, v))
}

fn scaling() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/scaling.toml"));
    let sc = cfg.scaling.as_ref().unwrap();
    let out = run_scaling(sc, cfg.seed, Path::new(".")).unwrap();
    let (passed, detail) = check_line(&out.report().checks);
    let sim: Vec<String> = out
        .rows
        .iter()
        .map(|r| format!("n={} ({:.4}, {:.4})", r.n, r.mean.value, r.variance.value))
        .collect();
    let (exact, diff) = scaling_oracles(&sc.ns);
    let exact: Vec<String> = exact.iter().map(|(m, v)| format!("({m:.4}, {v:.4})")).collect();
    let detail = format!(
        "{detail}; simulated {} vs diffusion ({:.4}, {:.4}); exact {} vs ({:.4}, {:.4})",
        sim.join(" "),
        out.diffusion_mean.value,
        out.diffusion_variance.value,
        exact.join(" "),
        diff.0,
        diff.1
    );
    report(
        4,
        "Halfin-Whitt scaling trend",
        passed,
        t.elapsed(),
        Some(Duration::from_secs(600)),
        detail,
    )
}

fn discounted() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/discounted_gap.toml"));
    let out = run_discounted_gap(cfg.discounted_gap.as_ref().unwrap(), cfg.seed).unwrap();
    let (passed, detail) = check_line(&out.report().checks);
    let gaps: Vec<String> = out.rows.iter().map(|g| format!("n={} {:.4}", g.n, g.gap)).collect();
    let detail = format!("V = {:.4}; gaps {}; {detail}", out.value, gaps.join(", "));
    report(
        5,
        "discounted optimality gap",
        passed,
        t.elapsed(),
        Some(Duration::from_secs(1800)),
        detail,
    )
}

fn ergodic() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/ergodic_gap.toml"));
    let out = run_ergodic_gap(cfg.ergodic_gap.as_ref().unwrap(), cfg.seed).unwrap();
    let (passed, detail) = check_line(&out.report().checks);
    let gaps: Vec<String> = out.rows.iter().map(|g| format!("n={} {:.4}", g.n, g.gap)).collect();
    let detail = format!("rho = {:.4}; gaps {}; {detail}", out.rho, gaps.join(", "));
    report(
        6,
        "ergodic optimality gap",
        passed,
        t.elapsed(),
        Some(Duration::from_secs(2700)),
        detail,
    )
}

fn moments() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/moment_bound.toml"));
    let out = run_moment_bound(cfg.moment_bound.as_ref().unwrap(), cfg.seed, Path::new(".")).unwrap();
    let (passed, detail) = check_line(&out.report().checks);
    let vals: Vec<String> = out.rows.iter().map(|(n, e)| format!("n={n} {:.4}", e.value)).collect();
    report(
        7,
        "moment-bound uniformity",
        passed,
        t.elapsed(),
        None,
        format!("{}; {detail}", vals.join(", ")),
    )
}

fn lyapunov() -> Line {
    let t = Instant::now();
    let base = Path::new(".");
    let cfg = config(include_str!("../../../configs/lyapunov.toml"));
    let good = run_lyapunov(cfg.lyapunov.as_ref().unwrap(), cfg.seed, base).unwrap();
    let cfg = config(include_str!("../../../configs/lyapunov_idling.toml"));
    let bad = run_lyapunov(cfg.lyapunov.as_ref().unwrap(), cfg.seed, base).unwrap();
    let at = |o: &LyapunovOutcome, r: f64| o.probes.iter().find(|p| (p.norm - r).abs() < 1e-9).unwrap().drift;
    let mut passed = good.slope < 0.0;
    let mut parts = Vec::new();
    for r in [10.0, 20.0] {
        let (g, b) = (at(&good, r), at(&bad, r));
        passed &= g.value + 3.0 * g.std_error < 0.0 && b.value - 3.0 * b.std_error > 0.0;
        parts.push(format!(
            "|x|={r}: modified {:.1}±{:.1}, idling {:.1}±{:.1}",
            g.value, g.std_error, b.value, b.std_error
        ));
    }
    let detail = format!("{}; slope {:.2}", parts.join(", "), good.slope);
    report(8, "Lyapunov drift shape", passed, t.elapsed(), None, detail)
}

fn occupation() -> Line {
    let t = Instant::now();
    let cfg = config(include_str!("../../../configs/occupation.toml"));
    let out = run_occupation(cfg.occupation.as_ref().unwrap(), cfg.seed, Path::new(".")).unwrap();
    let worst = out
        .diffusion
        .iter()
        .map(|e| e.value.abs() / e.std_error)
        .fold(0.0, f64::max);
    let (passed, detail) = check_line(&out.report().checks);
    let detail = format!(
        "{} functions, largest |residual|/SE {worst:.2}; {detail}",
        out.names.len()
    );
    report(
        9,
        "occupation-measure residual",
        passed && out.names.len() == 6,
        t.elapsed(),
        None,
        detail,
    )
}

fn structural() -> Line {
    let t = Instant::now();
    let mut rng = stream(10, 0);
    let mut admissible = 0usize;
    let mut evaluations = 0usize;
    while evaluations < 100_000 {
        let d = rng.random_range(1..=4usize);
        let n = rng.random_range(1..=500u64);
        let x: Vec<u64> = (0..d).map(|_| rng.random_range(0..=n)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let rho: Vec<f64> = w.iter().map(|v| v / total).collect();
        let gamma: Vec<f64> = (0..d).map(|_| if rng.random_bool(0.3) { 0.0 } else { 1.0 }).collect();
        let order: Vec<usize> = (0..d).rev().collect();
        let markov = MarkovControlPolicy::new(ControlField::Constant(rho.clone()), n, &rho, &gamma);
        let zs = [
            static_priority(&x, n, &order),
            modified_priority(&x, n, &rho, &gamma),
            markov.allocate_counts(&x),
        ];
        for z in zs {
            evaluations += 1;
            admissible += is_admissible(&x, &z, n) as usize;
        }
    }
    let mut worst_total = 0.0f64;
    for _ in 0..100_000 {
        let d = rng.random_range(1..=5usize);
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1e4)).collect();
        let (a, b): (f64, f64) = (y.iter().sum(), quantize(&y).iter().sum());
        worst_total = worst_total.max((a - b).abs() / a.max(1.0));
    }
    let mut round_trips = 0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=4usize);
        let n = rng.random_range(1..=300u64);
        let x: Vec<u64> = (0..d).map(|_| rng.random_range(0..=n)).collect();
        let order: Vec<usize> = (0..d).collect();
        // Any feasible allocation: static priority in a random rotation.
        let mut rotated = order.clone();
        rotated.rotate_left(rng.random_range(0..d));
        let z = static_priority(&x, n, &rotated);
        let u = u_from_z(&x, &z, n).unwrap();
        let back = if x.iter().sum::<u64>() > n {
            z_from_u(&x, &u, n).unwrap()
        } else {
            z.clone()
        };
        round_trips += (back == z) as usize;
    }
    let passed = admissible == evaluations && worst_total <= 1e-9 && round_trips == 1000;
    let detail = format!(
        "{admissible}/{evaluations} admissible, quantize total error {worst_total:.1e}, {round_trips}/1000 round trips"
    );
    report(10, "structural invariants", passed, t.elapsed(), None, detail)
}

fn main() {
    let criteria: [fn() -> Line; 10] = [
        identities,
        birth_death,
        compound_poisson,
        scaling,
        discounted,
        ergodic,
        moments,
        lyapunov,
        occupation,
        structural,
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.contains(&(i as u32 + 1)) {
            continue;
        }
        if !c().passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
