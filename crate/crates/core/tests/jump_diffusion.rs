use qedlab::diffusion::{
    generator_apply, occupation_residual, run_path, simulate, simulate_recorded, test_function_library, DiffusionModel,
    JumpMeasure, PathEvent, Polynomial, TestFunction,
};
use qedlab::policy::ControlField;
use qedlab::renewal::RenewalDist;
use qedlab::rng::stream;
use qedlab::stats::{mean_var, BatchAccumulator};

fn linear_model(ell: f64, mu: f64, beta: f64, theta: f64) -> DiffusionModel {
    let jumps = (beta > 0.0).then(|| JumpMeasure::new(beta, theta, RenewalDist::exponential()).unwrap());
    DiffusionModel::new(vec![ell], vec![mu], vec![mu], vec![1.0], &[1.0], jumps).unwrap()
}

fn two_class_model() -> DiffusionModel {
    let jumps = JumpMeasure::new(0.5, 1.0, RenewalDist::exponential()).unwrap();
    DiffusionModel::new(
        vec![0.2, -0.1],
        vec![1.0, 2.0],
        vec![0.5, 1.0],
        vec![0.5, 1.0],
        &[1.0, 1.0],
        Some(jumps),
    )
    .unwrap()
}

/// Time average of `g(X)` over `[burn_in, horizon]` in batches.
fn time_average(
    model: &DiffusionModel,
    x0: &[f64],
    horizon: f64,
    burn_in: f64,
    dt: f64,
    seed: u64,
    g: impl Fn(&[f64]) -> f64,
) -> qedlab::stats::Estimate {
    let mut acc = BatchAccumulator::new(burn_in, horizon, 40);
    let control = ControlField::last_class(model.d());
    let mut rng = stream(seed, 0);
    run_path(model, &control, x0, horizon, dt, &mut rng, |ev| {
        if let PathEvent::Step { t, h, x, .. } = ev {
            acc.add(t, t + h, g(x));
        }
    });
    acc.estimate().unwrap()
}

#[test]
fn deterministic_linear_ode() {
    let model = DiffusionModel::new(vec![0.0], vec![1.0], vec![1.0], vec![0.0], &[1.0], None).unwrap();
    let control = ControlField::last_class(1);
    let path = simulate(&model, &control, &[2.0], 1.0, 1e-3, &mut stream(1, 0));
    let x1 = path.last_state()[0];
    let exact = 2.0 * (-1.0f64).exp();
    assert!((x1 - exact).abs() < 2e-3, "{x1} vs {exact}");
    assert!(path.jumps.is_empty());
    assert_eq!(path.len(), 1001);
}

#[test]
fn linear_sde_with_jumps_has_the_moment_identity_mean() {
    let (ell, mu, beta, theta) = (0.5, 1.0, 0.5, 2.0);
    let model = linear_model(ell, mu, beta, theta);
    let target = (ell + beta / theta) / mu;
    let est = time_average(&model, &[0.0], 20_000.0, 100.0, 1e-2, 7, |x| x[0]);
    assert!(
        est.within(target, 3.0),
        "mean {} ± {} vs {target}",
        est.value,
        est.std_error
    );
}

#[test]
fn jump_counts_are_poisson() {
    let model = linear_model(0.0, 1.0, 0.5, 1.0);
    let control = ControlField::last_class(1);
    let horizon = 200.0;
    let counts: Vec<f64> = (0..200)
        .map(|r| {
            let p = simulate_recorded(&model, &control, &[0.0], horizon, 0.05, 100, &mut stream(3, r));
            p.jumps.len() as f64
        })
        .collect();
    let (m, v) = mean_var(&counts);
    let se = (v / counts.len() as f64).sqrt();
    assert!((m - 0.5 * horizon).abs() < 3.0 * se, "count mean {m} ± {se}");
}

#[test]
fn jumps_are_rank_one_along_arrival_rates() {
    let model = two_class_model();
    let control = ControlField::last_class(2);
    let path = simulate_recorded(&model, &control, &[0.0, 0.0], 200.0, 1e-2, 10, &mut stream(5, 0));
    assert!(path.jumps.len() > 50);
    for j in &path.jumps {
        assert!(j.size > 0.0);
        for i in 0..2 {
            assert_eq!(j.increment[i], model.lambda[i] * j.size);
        }
    }
}

#[test]
fn equal_rates_make_the_control_irrelevant() {
    let jumps = JumpMeasure::new(0.5, 1.0, RenewalDist::exponential()).unwrap();
    let model = DiffusionModel::new(
        vec![0.3, -0.2],
        vec![1.0, 1.5],
        vec![1.0, 1.5],
        vec![0.5, 0.75],
        &[1.0, 2.0],
        Some(jumps),
    )
    .unwrap();
    let a = simulate(
        &model,
        &ControlField::last_class(2),
        &[1.0, 2.0],
        50.0,
        1e-2,
        &mut stream(9, 0),
    );
    let b = simulate(
        &model,
        &ControlField::constant(vec![0.7, 0.3]).unwrap(),
        &[1.0, 2.0],
        50.0,
        1e-2,
        &mut stream(9, 0),
    );
    assert_eq!(a, b);
}

#[test]
fn drift_below_zero_ignores_the_control() {
    let model = two_class_model();
    for x in [[-1.0, 0.5], [0.0, 0.0], [-3.0, -2.0]] {
        let a = model.drift(&x, &[1.0, 0.0]).unwrap();
        let b = model.drift(&x, &[0.3, 0.7]).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn generator_of_constants_and_linear_functions() {
    let model = two_class_model();
    let quad = model.quadrature();
    let u = [0.4, 0.6];
    for x in [[0.5, 1.0], [-2.0, 3.0]] {
        assert_eq!(generator_apply(&Polynomial::Constant(3.0), &x, &u, &model, &quad), 0.0);
    }
    let no_jumps = DiffusionModel::new(
        model.ell.clone(),
        model.mu.clone(),
        model.gamma.clone(),
        model.lambda.clone(),
        &[1.0, 1.0],
        None,
    )
    .unwrap();
    let x = [1.0, 0.5];
    let b = no_jumps.drift(&x, &u).unwrap();
    let g = generator_apply(&Polynomial::Sum, &x, &u, &no_jumps, &no_jumps.quadrature());
    assert!((g - (b[0] + b[1])).abs() < 1e-14);
}

#[test]
fn square_generator_matches_compound_poisson_moments() {
    let (ell, mu, gamma, lam, beta, theta) = (0.3, 2.0, 0.5, 1.5, 0.7, 2.0);
    let jumps = JumpMeasure::new(beta, theta, RenewalDist::exponential()).unwrap();
    let model = DiffusionModel::new(vec![ell], vec![mu], vec![gamma], vec![lam], &[0.5], Some(jumps)).unwrap();
    let quad = model.quadrature();
    let f = Polynomial::CoordinateSquare(0);
    for x in [-2.0f64, -0.3, 0.0, 0.8, 3.0] {
        let b = ell + mu * (-x).max(0.0) - gamma * x.max(0.0);
        let sigma2 = lam * 1.5;
        let ej = lam / theta;
        let ej2 = lam * lam * 2.0 / (theta * theta);
        let exact = 2.0 * x * b + sigma2 + beta * (2.0 * x * ej + ej2);
        let g = generator_apply(&f, &[x], &[1.0], &model, &quad);
        assert!((g - exact).abs() < 1e-6, "x = {x}: {g} vs {exact}");
    }
}

#[test]
fn occupation_residual_vanishes_under_the_last_class_control() {
    let model = two_class_model();
    let quad = model.quadrature();
    let control = ControlField::last_class(2);
    let path = simulate_recorded(&model, &control, &[0.0, 0.0], 10_000.0, 1e-3, 20, &mut stream(11, 0));
    let lib = test_function_library(2);
    let mut fns: Vec<&dyn TestFunction> = lib.iter().map(|f| f as &dyn TestFunction).collect();
    let constant = Polynomial::Constant(1.0);
    fns.push(&constant);
    let res = occupation_residual(&path, &control, &fns, &model, &quad, 100.0, 40).unwrap();
    for (f, r) in fns.iter().zip(&res) {
        assert!(
            r.value.abs() <= 3.0 * r.std_error + 1e-15,
            "{}: {} ± {}",
            f.name(),
            r.value,
            r.std_error
        );
    }
    assert_eq!(res.last().unwrap().value, 0.0);
}

#[test]
fn occupation_residual_shrinks_with_the_horizon() {
    let model = two_class_model();
    let quad = model.quadrature();
    let control = ControlField::last_class(2);
    let bump = &test_function_library(2)[0];
    let fns: [&dyn TestFunction; 1] = [bump];
    let mut prev = f64::INFINITY;
    for horizon in [1.0, 100.0, 1_000.0, 10_000.0] {
        let sq: f64 = (0..6)
            .map(|r| {
                let path = simulate_recorded(&model, &control, &[0.0, 0.0], horizon, 1e-3, 10, &mut stream(13, r));
                let v = occupation_residual(&path, &control, &fns, &model, &quad, 0.0, 20).unwrap()[0].value;
                v * v
            })
            .sum();
        let rms = (sq / 6.0).sqrt();
        assert!(rms < prev, "horizon {horizon}: {rms} not below {prev}");
        prev = rms;
    }
}

#[test]
fn euler_variance_bias_shrinks_with_the_step() {
    let model = linear_model(0.0, 1.0, 0.5, 1.0);
    // Stationary variance (σ² + λ²βE[s²]) / (2μ) with σ² = 2, E[s²] = 2.
    let exact = (2.0 + 0.5 * 2.0) / 2.0;
    for seed in 0..5 {
        let bias: Vec<f64> = [0.2, 0.1]
            .iter()
            .map(|&dt| {
                let m = time_average(&model, &[0.0], 20_000.0, 50.0, dt, 100 + seed, |x| x[0]).value;
                let s = time_average(&model, &[0.0], 20_000.0, 50.0, dt, 100 + seed, |x| x[0] * x[0]).value;
                s - m * m - exact
            })
            .collect();
        assert!(bias[0] > bias[1] && bias[1] > 0.0, "seed {seed}: biases {bias:?}");
    }
}
