use levy_fbsde::{
    assemble_coefficients, bsde_residual, build_basis, jump_consistency, residual_report,
    sample_path, simulate_forward, simulate_forward_on, simulate_forward_paths, solve_pide,
    uniqueness_probe, FbsdeError, FbsdeProblem, Jump, LevyMeasure, LevyModel, RngSpec,
    SamplePath, SolverConfig, SpatialGrid, TimeGrid,
};

fn bump(x: f64) -> f64 {
    (-0.5 * x * x).exp()
}

fn heat_problem() -> FbsdeProblem {
    FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(|_, _, _| vec![0.4])
        .with_terminal(|x| vec![bump(x[0])])
}

#[test]
fn frozen_path_without_dynamics() {
    let model = LevyModel::new(1.0, LevyMeasure::atomic([(1.0, 1.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let problem = FbsdeProblem::new(1, 1, 2, 1.0)
        .unwrap()
        .with_terminal(|x| vec![x[0] * x[0]])
        .with_driver(|_, _, _, _| vec![1.0]);
    let spatial = SpatialGrid::uniform_1d(-3.0, 3.0, 61).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let path = simulate_forward(&sol, &coeffs, &model, &[0.5], &grid, RngSpec::new(1, 0)).unwrap();
    for s in 0..=50 {
        assert_eq!(path.x(s), &[0.5]);
        assert_eq!(path.y(s), sol.theta_at(grid.time(s), &[0.5]).as_slice());
    }
}

#[test]
fn brownian_forward_increments() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = heat_problem();
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 161).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let path = simulate_forward(&sol, &coeffs, &model, &[0.0], &grid, RngSpec::new(5, 3)).unwrap();
    for s in 0..100 {
        let dx = path.x(s + 1)[0] - path.x(s)[0];
        assert!((dx - 0.4 * path.base().db()[s]).abs() < 1e-15);
    }
    let again = simulate_forward(&sol, &coeffs, &model, &[0.0], &grid, RngSpec::new(5, 3)).unwrap();
    assert_eq!(path, again);
}

#[test]
fn constant_terminal_has_zero_residual() {
    let model =
        LevyModel::new(0.5, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let problem = FbsdeProblem::new(1, 1, 2, 1.0)
        .unwrap()
        .with_drift(|_, x, _, _| vec![-0.2 * x[0]])
        .with_sigma(|_, _, _| vec![0.3, 0.1])
        .with_terminal(|_| vec![1.75]);
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 161).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let paths = simulate_forward_paths(&sol, &coeffs, &model, &[0.2], &grid, 9, 50).unwrap();
    for path in &paths {
        let r = bsde_residual(path, &coeffs).unwrap();
        assert!(r[0].abs() < 1e-8);
    }
}

#[test]
fn heat_residual_is_unbiased_and_shrinks() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = heat_problem();
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 401).unwrap();
    let config = SolverConfig {
        n_time: 400,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let mut rms = Vec::new();
    for n_steps in [100, 200, 400] {
        let grid = TimeGrid::new(1.0, n_steps).unwrap();
        let paths =
            simulate_forward_paths(&sol, &coeffs, &model, &[0.0], &grid, 2024, 10_000).unwrap();
        let report = residual_report(&paths, &coeffs).unwrap();
        assert_eq!(report.n_escaped, 0);
        assert!(report.passes(), "mean {:?} se {:?}", report.mean, report.se);
        rms.push(report.rms[0]);
    }
    assert!(rms[1] <= rms[0] && rms[2] <= rms[1], "{rms:?}");
}

#[test]
fn jumps_move_x_by_delta() {
    let model =
        LevyModel::new(0.3, LevyMeasure::atomic([(0.8, 1.5), (-0.4, 2.0)])).unwrap();
    let basis = build_basis(&model, 2).unwrap();
    let problem = FbsdeProblem::new(1, 1, 2, 1.0)
        .unwrap()
        .with_drift(|_, x, y, _| vec![0.1 * x[0] - 0.2 * y[0]])
        .with_sigma(|_, x, y| vec![0.3 + 0.1 * y[0].sin(), 0.1 * x[0].cos()])
        .with_terminal(|x| vec![bump(x[0])]);
    let spatial = SpatialGrid::uniform_1d(-6.0, 6.0, 121).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let paths = simulate_forward_paths(&sol, &coeffs, &model, &[0.1], &grid, 3, 20).unwrap();
    assert!(paths.iter().map(|p| p.base().jump_count()).sum::<usize>() > 0);
    for path in &paths {
        assert!(jump_consistency(path, &coeffs) < 1e-10);
    }
}

#[test]
fn future_increments_do_not_change_the_past() {
    let model = LevyModel::new(0.6, LevyMeasure::atomic([(1.0, 2.0)])).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(|_, _, y| vec![0.3 + 0.1 * y[0]])
        .with_terminal(|x| vec![bump(x[0])]);
    let spatial = SpatialGrid::uniform_1d(-6.0, 6.0, 121).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let grid = TimeGrid::new(1.0, 40).unwrap();
    let original = sample_path(&model, &basis, &grid, RngSpec::new(4, 0));
    let cut = 20;

    let mut db = original.db().to_vec();
    db[cut..].reverse();
    let mut jumps: Vec<Vec<Jump>> = (0..40).map(|s| original.jumps(s).to_vec()).collect();
    jumps[cut..].reverse();
    jumps[cut].push(Jump {
        time: grid.time(cut) + 0.5 * grid.dt(),
        size: 1.0,
    });
    let permuted = SamplePath::from_increments(&basis, &grid, db, jumps);

    let a = simulate_forward_on(&sol, &coeffs, &[0.0], original).unwrap();
    let b = simulate_forward_on(&sol, &coeffs, &[0.0], permuted).unwrap();
    for s in 0..=cut {
        assert_eq!(a.x(s), b.x(s));
        assert_eq!(a.y(s), b.y(s));
        // Z over (t_s, t_{s+1}] is fixed at t_s.
        assert_eq!(a.z(s), b.z(s));
    }
    assert_ne!(a.x(cut + 1), b.x(cut + 1));
}

#[test]
fn uniqueness_probe_gaps() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = heat_problem();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let fine = solve_pide(
        &problem,
        &model,
        &basis,
        &SpatialGrid::uniform_1d(-8.0, 8.0, 401).unwrap(),
        &SolverConfig::default(),
    )
    .unwrap();
    let coarse = solve_pide(
        &problem,
        &model,
        &basis,
        &SpatialGrid::uniform_1d(-8.0, 8.0, 101).unwrap(),
        &SolverConfig::default(),
    )
    .unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let base = sample_path(&model, &basis, &grid, RngSpec::new(8, 1));

    let path = simulate_forward_on(&fine, &coeffs, &[0.3], base.clone()).unwrap();
    let exact = uniqueness_probe(&path, &fine);
    assert_eq!(exact.y_gap, 0.0);
    assert_eq!(exact.z_gap, 0.0);

    let mut shifted = path.clone();
    shifted.y_mut()[37] += 1e-3;
    let gap = uniqueness_probe(&shifted, &fine).y_gap;
    assert!((gap - 1e-3).abs() < 1e-15);

    // Candidate built on the coarse grid, measured against the fine field on its own path.
    let candidate = simulate_forward_on(&coarse, &coeffs, &[0.3], base).unwrap();
    let report = uniqueness_probe(&candidate, &fine);
    // Bound: nodal errors of both fields against the closed form plus the linear
    // interpolation error h²/8·sup|θ''| of the coarse field (sup|θ''| ≤ 1 for the bump).
    let nodal = |sol: &levy_fbsde::PideSolution| {
        let grid = sol.time_grid();
        let mut worst: f64 = 0.0;
        for s in 0..=grid.n_steps() {
            let var = 1.0 + 0.16 * (1.0 - grid.time(s));
            for n in 0..sol.spatial().n_nodes() {
                let x = sol.spatial().coords(n)[0];
                let exact = (-0.5 * x * x / var).exp() / var.sqrt();
                worst = worst.max((sol.theta(s)[n] - exact).abs());
            }
        }
        worst
    };
    let h = coarse.spatial().axes()[0].spacing();
    let bound = nodal(&coarse) + nodal(&fine) + h * h / 8.0;
    assert!(report.y_gap > 0.0 && report.y_gap <= bound, "{report:?} bound {bound}");
    assert!(report.z_sup_gap < 0.4 * h, "{report:?}");
}

#[test]
fn escaped_paths_are_excluded() {
    let model = LevyModel::brownian(1.0).unwrap();
    let basis = build_basis(&model, 1).unwrap();
    let problem = FbsdeProblem::new(1, 1, 1, 1.0)
        .unwrap()
        .with_sigma(|_, _, _| vec![1.0])
        .with_terminal(|x| vec![x[0]]);
    let spatial = SpatialGrid::uniform_1d(-1.0, 1.0, 41).unwrap();
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default()).unwrap();
    let coeffs = assemble_coefficients(&problem, &basis, &model).unwrap();
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let paths = simulate_forward_paths(&sol, &coeffs, &model, &[0.0], &grid, 1, 200).unwrap();
    let escaped: Vec<_> = paths.iter().filter(|p| !p.is_complete()).collect();
    assert!(!escaped.is_empty());
    let first = escaped[0];
    let e = first.escape().unwrap();
    assert_eq!(first.len(), e.step);
    assert!(matches!(
        bsde_residual(first, &coeffs),
        Err(FbsdeError::DomainEscape { .. })
    ));
    let report = residual_report(&paths, &coeffs).unwrap();
    assert_eq!(report.n_escaped, escaped.len());
    assert!(report.escape_rate() > 0.01 && !report.passes());
}
