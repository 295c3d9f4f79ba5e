mod common;

use std::time::Instant;

use common::gaussian_expectation;
use proptest::prelude::*;
use qedlab::control::{
    epsilon_optimal_control, hamiltonian_objective, minimize_hamiltonian, read_grid_file, running_cost,
    solve_discounted, solve_ergodic, write_grid_file, Boundary, CostSpec, SolverOptions,
};
use qedlab::diffusion::{run_path, DiffusionModel, JumpMeasure, PathEvent};
use qedlab::policy::{check_simplex, ControlField, GridField};
use qedlab::quad::integrate_to_infinity;
use qedlab::renewal::RenewalDist;
use qedlab::rng::stream;
use qedlab::stats::BatchAccumulator;

fn ou(ell: f64, mu: f64) -> DiffusionModel {
    DiffusionModel::new(vec![ell], vec![mu], vec![mu], vec![1.0], &[1.0], None).unwrap()
}

fn two_class(beta: f64) -> DiffusionModel {
    let jumps = (beta > 0.0).then(|| JumpMeasure::new(beta, 1.0, RenewalDist::exponential()).unwrap());
    DiffusionModel::new(
        vec![0.0, 0.0],
        vec![1.0, 2.0],
        vec![0.5, 1.0],
        vec![0.5, 1.0],
        &[1.0, 1.0],
        jumps,
    )
    .unwrap()
}

fn opts(a: f64, h: f64) -> SolverOptions {
    SolverOptions {
        a,
        h,
        ..SolverOptions::default()
    }
}

/// `E[(X⁺)²]` for `X ~ N(m, v)`.
fn positive_second_moment(m: f64, v: f64) -> f64 {
    gaussian_expectation(m, v.sqrt(), |x| x.max(0.0).powi(2))
}

#[test]
fn zero_cost_gives_zero_value() {
    let model = ou(0.5, 1.0);
    let cost = CostSpec::new(0.0, 2.0).unwrap();
    let sol = solve_discounted(&model, &cost, 1.0, &opts(8.0, 0.1)).unwrap();
    assert!(sol.values.iter().all(|v| *v == 0.0));
    let erg = solve_ergodic(&model, &cost, &opts(8.0, 0.1)).unwrap();
    assert_eq!(erg.rho, Some(0.0));
}

#[test]
fn ou_discounted_value_matches_gaussian_quadrature() {
    let (ell, mu, alpha) = (0.5, 1.0, 1.0);
    let model = ou(ell, mu);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let sol = solve_discounted(&model, &cost, alpha, &opts(8.0, 0.02)).unwrap();
    let sigma2 = 2.0;
    let exact = integrate_to_infinity(
        |t| {
            let m = ell / mu * (1.0 - (-mu * t).exp());
            let v = sigma2 * (1.0 - (-2.0 * mu * t).exp()) / (2.0 * mu);
            (-alpha * t).exp() * positive_second_moment(m, v.max(1e-300))
        },
        0.0,
        1e-10,
        1e-12,
    )
    .unwrap();
    let v0 = sol.value_at(&[0.0]);
    assert!((v0 - exact).abs() <= 0.02 * exact, "V(0) = {v0}, oracle {exact}");
    assert_eq!(sol.policy_iterations(alpha), 1);
    assert!(sol.values.iter().all(|v| *v >= 0.0));
}

#[test]
fn large_discount_approaches_running_cost_over_alpha() {
    let model = ou(0.0, 1.0);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let alpha = 1e3;
    let sol = solve_discounted(&model, &cost, alpha, &opts(8.0, 0.05)).unwrap();
    for idx in 0..sol.grid.len() {
        let x = sol.grid.point(idx);
        if x[0] >= 1.0 && x[0] <= 4.0 {
            let target = running_cost(&x, &[1.0], &cost).unwrap() / alpha;
            assert!(
                (sol.values[idx] - target).abs() <= 0.05 * target,
                "x = {x:?}: {} vs {target}",
                sol.values[idx]
            );
        }
    }
}

#[test]
fn ou_ergodic_value_matches_gaussian_stationary_law() {
    let (ell, mu) = (0.5, 1.0);
    let model = ou(ell, mu);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let sol = solve_ergodic(&model, &cost, &opts(8.0, 0.02)).unwrap();
    let exact = positive_second_moment(ell / mu, 2.0 / (2.0 * mu));
    let rho = sol.rho.unwrap();
    assert!(sol.converged);
    assert!((rho - exact).abs() <= 0.02 * exact, "rho = {rho}, oracle {exact}");
    assert!(sol.value_at(&[0.0]).abs() < 1e-12);
}

#[test]
fn ergodic_value_with_jumps_matches_long_run_simulation() {
    let jumps = JumpMeasure::new(0.5, 1.0, RenewalDist::exponential()).unwrap();
    let model = DiffusionModel::new(vec![-0.5], vec![1.0], vec![0.5], vec![1.0], &[1.0], Some(jumps)).unwrap();
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let sol = solve_ergodic(&model, &cost, &opts(18.0, 0.03)).unwrap();
    let rho = sol.rho.unwrap();
    let horizon = 40_000.0;
    let mut acc = BatchAccumulator::new(200.0, horizon, 40);
    let control = ControlField::last_class(1);
    run_path(&model, &control, &[0.0], horizon, 5e-3, &mut stream(21, 0), |ev| {
        if let PathEvent::Step { t, h, x, u } = ev {
            acc.add(t, t + h, running_cost(x, u, &cost).unwrap());
        }
    });
    let est = acc.estimate().unwrap();
    assert!(
        est.within(rho, 3.0),
        "rho = {rho}, simulation {} ± {}",
        est.value,
        est.std_error
    );
}

#[test]
fn ergodic_value_does_not_depend_on_the_anchor() {
    let model = ou(0.5, 1.0);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let a = solve_ergodic(&model, &cost, &opts(8.0, 0.05)).unwrap();
    let b = solve_ergodic(
        &model,
        &cost,
        &SolverOptions {
            anchor: Some(vec![1.5]),
            ..opts(8.0, 0.05)
        },
    )
    .unwrap();
    let (ra, rb) = (a.rho.unwrap(), b.rho.unwrap());
    assert!((ra - rb).abs() <= 1e-4 * ra.max(1.0), "{ra} vs {rb}");
}

#[test]
fn two_class_discounted_solution_properties() {
    let model = two_class(0.5);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let start = Instant::now();
    let sol = solve_discounted(&model, &cost, 1.0, &opts(8.0, 0.2)).unwrap();
    eprintln!(
        "d=2 h=0.2 solve took {:?}, {} policy iterations",
        start.elapsed(),
        sol.log.len()
    );
    assert!(sol.values.iter().all(|v| *v >= 0.0));
    for idx in 0..sol.grid.len() {
        check_simplex(sol.control_at_node(idx), 1e-12).unwrap();
    }
    let scale = sol.values.iter().cloned().fold(0.0, f64::max);
    for rec in &sol.log {
        assert!(
            rec.max_increase <= 1e-10 * scale.max(1.0),
            "value increased by {}",
            rec.max_increase
        );
    }
    assert!(sol.residual <= 1e-8 * scale.max(1.0));
}

#[test]
fn box_enlargement_barely_moves_interior_values() {
    let model = ou(0.5, 1.0);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let small = solve_discounted(&model, &cost, 1.0, &opts(8.0, 0.05)).unwrap();
    let large = solve_discounted(&model, &cost, 1.0, &opts(12.0, 0.05)).unwrap();
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let (vs, vl) = (small.value_at(&[x]), large.value_at(&[x]));
        assert!((vs - vl).abs() <= 0.005 * vl.max(1e-3), "x = {x}: {vs} vs {vl}");
    }
    let neumann = solve_discounted(
        &model,
        &cost,
        1.0,
        &SolverOptions {
            boundary: Boundary::Neumann,
            ..opts(8.0, 0.05)
        },
    )
    .unwrap();
    assert!((neumann.value_at(&[0.0]) - large.value_at(&[0.0])).abs() <= 0.005 * large.value_at(&[0.0]));
}

#[test]
fn small_box_is_rejected() {
    let model = two_class(0.5);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    assert!(solve_discounted(&model, &cost, 1.0, &opts(3.0, 0.2)).is_err());
}

#[test]
fn grid_file_round_trip() {
    let model = ou(0.5, 1.0);
    let cost = CostSpec::new(1.0, 2.0).unwrap();
    let sol = solve_discounted(&model, &cost, 1.0, &opts(8.0, 0.1)).unwrap();
    let mut buf = Vec::new();
    write_grid_file(&mut buf, &sol).unwrap();
    let back = read_grid_file(buf.as_slice()).unwrap();
    assert_eq!(back.grid, sol.grid);
    assert_eq!(back.values, sol.values);
    assert_eq!(back.controls, sol.controls);
    assert_eq!(back.alpha, Some(1.0));
    assert_eq!(back.control_grid().unwrap(), sol.control_grid());
    let text = String::from_utf8(buf).unwrap();
    assert!(read_grid_file(text.replacen("# h=0.1", "# h=0.3", 1).as_bytes()).is_err());
}

#[test]
fn shaping_examples() {
    let a = 4.0;
    let h = 0.5;
    let m = (2.0 * a / h) as usize + 1;
    let last: Vec<f64> = (0..m * m).flat_map(|_| [0.0, 1.0]).collect();
    let v = GridField::new(2, a, h, last).unwrap();
    let shaped = epsilon_optimal_control(&v, 3.0).unwrap();
    for x in [[0.0, 0.0], [2.9, 0.1], [-1.0, 2.5]] {
        assert_eq!(shaped.eval(&x), vec![0.0, 1.0]);
    }
    let mixed: Vec<f64> = (0..m * m).flat_map(|_| [0.3, 0.7]).collect();
    let v = GridField::new(2, a, h, mixed).unwrap();
    let shaped = epsilon_optimal_control(&v, 3.0).unwrap();
    assert_eq!(shaped.eval(&[4.0, 0.0]), vec![0.0, 1.0]);
    assert_eq!(shaped.eval(&[0.5, 0.5]), vec![0.3, 0.7]);
    let mut rng = stream(4, 0);
    use rand::Rng;
    for _ in 0..1000 {
        let r = 3.0 - 2.0 * h * rng.random::<f64>();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let u = shaped.eval(&[r * phi.cos(), r * phi.sin()]);
        check_simplex(&u, 1e-12).unwrap();
        assert!(u[0] >= 0.0 && u[0] <= 0.3 + 1e-12 && u[1] >= 0.7 - 1e-12 && u[1] <= 1.0);
    }
    assert!(epsilon_optimal_control(&v, 5.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hamiltonian_minimizer_beats_random_simplex_points(
        x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, p0 in -5.0f64..5.0, p1 in -5.0f64..5.0,
        m in 1.0f64..3.0, seed in 0u64..1000,
    ) {
        let model = two_class(0.0);
        let cost = CostSpec::new(1.0, m).unwrap();
        let x = [x0, x1];
        let p = [p0, p1];
        let u = minimize_hamiltonian(&x, &p, &model, &cost).unwrap();
        check_simplex(&u, 1e-12).unwrap();
        let best = hamiltonian_objective(&x, &u, &p, &model, &cost);
        let mut rng = stream(seed, 0);
        use rand::Rng;
        for _ in 0..1000 {
            let t: f64 = rng.random();
            let v = hamiltonian_objective(&x, &[t, 1.0 - t], &p, &model, &cost);
            prop_assert!(best <= v + 1e-9 * (1.0 + v.abs()), "{best} > {v} at t = {t}");
        }
    }
}
