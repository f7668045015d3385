use levy_fbsde::{
    assemble_coefficients, build_basis, solve_pide, theta1_from_theta, FbsdeError, FbsdeProblem,
    LevyMeasure, LevyModel, SolverConfig, SolverMode, SpatialGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump(x: f64) -> f64 {
    (-0.5 * x * x).exp()
}

/// Gaussian bump of unit width after heat flow with diffusivity `s²/2` for time `tau`.
fn heat_oracle(s: f64, tau: f64, x: f64) -> f64 {
    let var = 1.0 + s * s * tau;
    (-0.5 * x * x / var).exp() / var.sqrt()
}

/// `E[h(x + κN − λκτ)]`, `N ~ Poisson(λτ)`, summed until the weights are negligible.
fn poisson_oracle(lambda: f64, kappa: f64, tau: f64, x: f64) -> f64 {
    let mean = lambda * tau;
    let mut weight = (-mean).exp();
    let mut total = 0.0;
    for n in 0..200 {
        if n > 0 {
            weight *= mean / n as f64;
        }
        total += weight * bump(x + kappa * n as f64 - lambda * kappa * tau);
        if n as f64 > mean && weight < 1e-18 {
            break;
        }
    }
    total
}

fn heat_problem(s: f64) -> FbsdeProblem {
    FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(move |_, _, _| vec![s])
        .with_terminal(|x| vec![bump(x[0])])
}

fn heat_error(n_points: usize, n_time: usize) -> f64 {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, n_points).unwrap();
    let config = SolverConfig {
        n_time,
        ..Default::default()
    };
    let sol = solve_pide(&heat_problem(0.4), &model, &basis, &spatial, &config).unwrap();
    let level = sol.theta(0);
    (0..spatial.n_nodes())
        .map(|n| (level[n] - heat_oracle(0.4, 1.0, spatial.coords(n)[0])).abs())
        .fold(0.0, f64::max)
}

#[test]
fn heat_kernel_matches_closed_form() {
    let err = heat_error(401, 200);
    assert!(err < 1e-3, "max error {err}");
}

#[test]
fn heat_kernel_mesh_order() {
    let coarse = heat_error(51, 25);
    let fine = heat_error(101, 100);
    let order = (coarse / fine).log2();
    assert!(order >= 1.8, "errors {coarse:e} {fine:e}, order {order}");
}

#[test]
fn final_condition_is_exact_and_time_interpolation_hits_levels() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 161).unwrap();
    let sol = solve_pide(&heat_problem(0.4), &model, &basis, &spatial, &SolverConfig::default())
        .unwrap();
    let last = sol.time_grid().n_steps();
    for n in 0..spatial.n_nodes() {
        let x = spatial.coords(n);
        assert_eq!(sol.theta(last)[n], bump(x[0]));
        assert_eq!(sol.theta_at(1.0, &x)[0], bump(x[0]));
        assert_eq!(sol.theta_at(0.0, &x)[0], sol.theta(0)[n]);
    }
    assert_eq!(sol.mode(), SolverMode::Extended);
}

#[test]
fn compensated_poisson_matches_series() {
    let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 1.0)])).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let kappa = 0.5;
    // p_1(1) = 1 here, so σ_1 = κ gives δ ≡ κ.
    assert!((basis.eval_p(1.0)[0] - 1.0).abs() < 1e-14);
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(move |_, _, _| vec![kappa])
        .with_terminal(|x| vec![bump(x[0])]);
    let spatial = SpatialGrid::uniform_1d(-10.0, 10.0, 401).unwrap();
    let config = SolverConfig {
        n_time: 1000,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config).unwrap();
    let err = (0..spatial.n_nodes())
        .map(|n| (sol.theta(0)[n] - poisson_oracle(1.0, kappa, 1.0, spatial.coords(n)[0])).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "max error {err}");
}

#[test]
fn constants_are_preserved_exactly() {
    let model =
        LevyModel::new(0.5, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let problem = FbsdeProblem::new(1, 2, 2, 1.0)
        .unwrap()
        .with_drift(|_, x, _, _| vec![0.3 * x[0].sin()])
        .with_sigma(|_, x, y| vec![0.5 + 0.1 * x[0].cos(), 0.2 * y[0].tanh()])
        .with_terminal(|_| vec![3.25, -1.5]);
    let spatial = SpatialGrid::uniform_1d(-6.0, 6.0, 121).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    for s in 0..=sol.time_grid().n_steps() {
        for n in 0..spatial.n_nodes() {
            assert!((sol.theta(s)[2 * n] - 3.25).abs() < 1e-12);
            assert!((sol.theta(s)[2 * n + 1] + 1.5).abs() < 1e-12);
        }
        assert!(sol.theta1(s).iter().all(|z| z.abs() < 1e-12));
    }
}

#[test]
fn constants_are_preserved_in_two_dimensions() {
    let model = LevyModel::new(0.4, LevyMeasure::atomic([(0.8, 1.0)])).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(2, 1, 1, 0.5)
        .unwrap()
        .with_drift(|_, x, _, _| vec![0.1 * x[1], -0.2])
        .with_sigma(|_, _, _| vec![0.3, 0.2])
        .with_terminal(|_| vec![2.0]);
    let spatial = SpatialGrid::new(vec![
        levy_fbsde::GridAxis::new(-3.0, 3.0, 31),
        levy_fbsde::GridAxis::new(-3.0, 3.0, 25),
    ])
    .unwrap();
    let config = SolverConfig {
        n_time: 20,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config).unwrap();
    assert!(sol.theta(0).iter().all(|v| (v - 2.0).abs() < 1e-12));
}

#[test]
fn two_dimensional_heat_separates() {
    // Independent axes driven by one Brownian motion with loadings (s, 0): the x₂ direction is
    // frozen and the x₁ direction is the one-dimensional heat flow.
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(2, 1, 1, 1.0)
        .unwrap()
        .with_sigma(|_, _, _| vec![0.4, 0.0])
        .with_terminal(|x| vec![bump(x[0]) * (1.0 + 0.1 * x[1])]);
    let spatial = SpatialGrid::new(vec![
        levy_fbsde::GridAxis::new(-8.0, 8.0, 161),
        levy_fbsde::GridAxis::new(-1.0, 1.0, 17),
    ])
    .unwrap();
    let config = SolverConfig {
        n_time: 100,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config).unwrap();
    for x in [[-1.0, 0.5], [0.0, 0.0], [0.7, -0.25]] {
        let exact = heat_oracle(0.4, 1.0, x[0]) * (1.0 + 0.1 * x[1]);
        assert!((sol.theta_at(0.0, &x)[0] - exact).abs() < 5e-3);
    }
}

#[test]
fn c_formulas_agree_on_random_probes() {
    let model = LevyModel::new(
        0.7,
        LevyMeasure::atomic([(1.0, 0.5), (-0.6, 1.2), (0.4, 2.0), (1.7, 0.1)]),
    )
    .unwrap();
    let basis = build_basis(&model, 4).unwrap();
    let problem = FbsdeProblem::new(2, 2, 4, 1.0).unwrap().with_sigma(|t, x, y| {
        vec![
            x[0].sin(),
            y[1],
            1.0 + t,
            -0.3 * x[1],
            y[0] * x[0],
            0.5,
            (x[1] - y[1]).cos(),
            2.0 * t - 1.0,
        ]
    });
    let set = assemble_coefficients(&problem, &basis, &model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let t = rng.gen::<f64>();
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let y = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let a = set.c(t, &x, &y);
        let b = set.c_direct(t, &x, &y);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }
}

#[test]
fn theta1_of_linear_field_is_c() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(|_, _, _| vec![0.35]);
    let set = assemble_coefficients(&problem, &basis, &model).unwrap();
    let spatial = SpatialGrid::uniform_1d(-2.0, 2.0, 41).unwrap();
    let theta: Vec<f64> = (0..41).map(|n| spatial.coords(n)[0]).collect();
    let z = theta1_from_theta(&spatial, 0.0, &theta, &set);
    assert!(z.iter().all(|v| (v - 0.35).abs() < 1e-12));
}

#[test]
fn theta1_vanishes_without_volatility() {
    let model = LevyModel::new(1.0, LevyMeasure::atomic([(1.0, 1.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let problem = FbsdeProblem::new(1, 1, 2, 1.0).unwrap();
    let set = assemble_coefficients(&problem, &basis, &model).unwrap();
    let spatial = SpatialGrid::uniform_1d(-2.0, 2.0, 41).unwrap();
    let theta: Vec<f64> = (0..41).map(|n| spatial.coords(n)[0].powi(3)).collect();
    assert!(theta1_from_theta(&spatial, 0.0, &theta, &set)
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn large_jumps_are_rejected() {
    let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 1.0)])).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(|_, _, _| vec![3.0]);
    let spatial = SpatialGrid::uniform_1d(-2.0, 2.0, 41).unwrap();
    let err = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, FbsdeError::GridTooSmall { axis: 0, .. }), "{err}");
}

#[test]
fn strict_mode_rejects_z_dependence() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_driver(|_, _, _, z| vec![z[0]])
        .with_z_dependence(true);
    let spatial = SpatialGrid::uniform_1d(-2.0, 2.0, 41).unwrap();
    let config = SolverConfig {
        mode: SolverMode::Strict,
        ..Default::default()
    };
    assert!(matches!(
        solve_pide(&problem, &model, &basis, &spatial, &config),
        Err(FbsdeError::InvalidProblem(_))
    ));
}

#[test]
fn z_driver_acts_as_drift() {
    // g = μ z with σ = s, ν = 0 adds μ s ∂θ: a heat flow transported by μ s.
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let (s, mu) = (0.4, 0.5);
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(move |_, _, _| vec![s])
        .with_driver(move |_, _, _, z| vec![mu * z[0]])
        .with_z_dependence(true)
        .with_terminal(|x| vec![bump(x[0])]);
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 401).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    assert_eq!(sol.subintervals().len(), 1);
    for x in [-1.0, 0.0, 1.3] {
        let exact = heat_oracle(s, 1.0, x + mu * s);
        assert!((sol.theta_at(0.0, &[x])[0] - exact).abs() < 2e-3);
    }
}

fn coupled_problem(horizon: f64) -> FbsdeProblem {
    FbsdeProblem::new(1, 1, 2, horizon)
        .unwrap()
        .with_sigma(|_, _, y| vec![0.4 + 0.3 * y[0].sin(), 0.2 * y[0].cos()])
        .with_driver(|_, _, y, _| vec![4.0 * y[0].sin()])
        .with_terminal(|x| vec![bump(x[0])])
}

#[test]
fn coupled_fixed_point_contracts_and_splits() {
    let model =
        LevyModel::new(0.5, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 201).unwrap();
    let config = SolverConfig {
        fp_max: 10,
        ..Default::default()
    };

    let short = solve_pide(&coupled_problem(0.1), &model, &basis, &spatial, &config).unwrap();
    let log = short.iteration_log();
    assert_eq!(log.len(), 1);
    assert!(log[0].converged && log[0].residuals.len() <= 10);
    assert!(log[0].residuals.windows(2).all(|w| w[1] < w[0]));
    assert!(log[0].contraction_ratio().unwrap() < 0.5);

    let long = solve_pide(&coupled_problem(1.0), &model, &basis, &spatial, &config).unwrap();
    let pieces = long.subintervals();
    assert!(pieces.len() >= 2);
    // Converged ranges tile [0, T] and are produced from the top down.
    let mut ends: Vec<(f64, f64)> = pieces.clone();
    ends.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(ends[0].0, 0.0);
    assert!((ends.last().unwrap().1 - 1.0).abs() < 1e-12);
    for w in ends.windows(2) {
        assert!((w[0].1 - w[1].0).abs() < 1e-12);
    }
    assert!((pieces[0].1 - 1.0).abs() < 1e-12);
}

#[test]
fn split_floor_gives_no_convergence() {
    let model =
        LevyModel::new(0.5, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 101).unwrap();
    let config = SolverConfig {
        fp_max: 2,
        min_dt_split: 0.3,
        ..Default::default()
    };
    let err = solve_pide(&coupled_problem(1.0), &model, &basis, &spatial, &config).unwrap_err();
    assert!(matches!(err, FbsdeError::NoConvergence { .. }), "{err}");
}
