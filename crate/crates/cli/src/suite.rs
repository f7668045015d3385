//! The verification suite run by `verify-all`.
//!
//! Each criterion is a fixed scenario with a pinned tolerance and a wall-clock budget. All
//! randomness comes from fixed seeds, so under `--deterministic` every artifact is reproducible
//! byte for byte.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use anyhow::Result;
use levy_fbsde::{
    assemble_coefficients, build_basis, chaos_identity_check, check_orthogonality,
    jump_count_test, martingale_stats, price, replication_check, residual_report,
    simulate_forward_paths, simulate_paths, solve_pide, ChaosIntegrand, DensityKind,
    DensityMeasure, FbsdeProblem, LevyMeasure, LevyModel, MarketModel, Payoff, SolverConfig,
    SpatialGrid, TeugelsBasis, TimeGrid,
};

use crate::artifacts;
use crate::check::{z_score, Check};
use crate::commands::Report;
use crate::oracles;
use crate::output::OutputDir;
use crate::problems::{bump_problem, coupled_problem};

const SEED: u64 = 20_240_601;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Criterion {
    pub fn within_budget(&self) -> bool {
        self.elapsed < self.budget
    }

    pub fn passed(&self) -> bool {
        self.within_budget() && self.checks.iter().all(|c| c.passed)
    }
}

fn timed(
    id: &'static str,
    title: &'static str,
    budget_secs: u64,
    body: impl FnOnce() -> Result<Vec<Check>>,
) -> Result<Criterion> {
    let start = Instant::now();
    let checks = body()?;
    Ok(Criterion {
        id,
        title,
        checks,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_secs),
    })
}

/// Largest order the measure `x²ν + a²δ₀` supports, capped at 5.
fn feasible_order(model: &LevyModel) -> usize {
    let support = match model.measure() {
        LevyMeasure::Atomic(atoms) => atoms.iter().filter(|a| a.weight > 0.0).count(),
        LevyMeasure::Density(_) => usize::MAX,
    };
    (support.saturating_add(usize::from(model.a() > 0.0))).min(5)
}

fn orthogonality_models() -> Vec<(&'static str, LevyModel)> {
    let atomic = |a, atoms: &[(f64, f64)]| LevyModel::new(a, LevyMeasure::atomic(atoms.to_vec())).expect("valid model");
    let gaussian = DensityMeasure::new(
        DensityKind::TruncatedGaussian {
            intensity: 2.0,
            mean: 0.0,
            std: 0.5,
        },
        (-2.0, 2.0),
        0.05,
    )
    .expect("valid density");
    vec![
        ("brownian", LevyModel::brownian(1.0).expect("valid model")),
        ("one-atom", atomic(1.0, &[(1.0, 1.0)])),
        ("two-atom", atomic(0.5, &[(1.0, 1.0), (-0.5, 2.0)])),
        ("three-atom", atomic(0.0, &[(-1.0, 0.5), (0.5, 1.0), (2.0, 0.25)])),
        ("three-atom-diffusive", atomic(0.8, &[(-1.0, 0.5), (0.5, 1.0), (2.0, 0.25)])),
        (
            "truncated-gaussian",
            LevyModel::new(0.3, LevyMeasure::Density(gaussian)).expect("valid model"),
        ),
    ]
}

fn orthogonality(out: &OutputDir) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut written = Vec::new();
    for (name, model) in orthogonality_models() {
        let top = feasible_order(&model);
        let mut worst: f64 = 0.0;
        for m in 1..=top {
            let basis = build_basis(&model, m)?;
            worst = worst.max(check_orthogonality(&basis, &model).max_residual());
            if m == top {
                written.push((name.to_string(), basis));
            }
        }
        checks.push(Check::below(
            "teugels",
            &format!("{name}, M = 1..={top}: max orthonormality / jump-identity residual"),
            worst,
            1e-9,
        ));
    }
    checks.push(Check::at_least("teugels", "number of models", written.len() as f64, 5.0));
    artifacts::write_basis(out, &written, true)?;
    Ok(checks)
}

fn two_atom_model(a: f64) -> LevyModel {
    LevyModel::new(a, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).expect("valid model")
}

fn martingales(out: &OutputDir) -> Result<Vec<Check>> {
    let model = two_atom_model(0.5);
    let basis = build_basis(&model, 3)?;
    let grid = TimeGrid::new(1.0, 200)?;
    let paths = simulate_paths(&model, &basis, &grid, SEED, 10_000);
    let stats = martingale_stats(&paths)?;
    let chi = jump_count_test(&paths, model.jump_intensity())?;
    artifacts::write_paths(out, &paths[..10])?;

    let mut checks = Vec::new();
    for (i, z) in stats.mean_z().iter().enumerate() {
        checks.push(Check::below("path_sim", &format!("|mean H⁽{}⁾_T| / SE", i + 1), z.abs(), 4.0));
    }
    for (i, row) in stats.cov_z.iter().enumerate() {
        for (j, z) in row.iter().enumerate().skip(i) {
            checks.push(Check::below(
                "path_sim",
                &format!("|cov(H⁽{}⁾_T, H⁽{}⁾_T) − δ| / SE", i + 1, j + 1),
                z.abs(),
                4.0,
            ));
        }
    }
    checks.push(Check::at_least("path_sim", "Poisson jump-count chi-square p-value", chi.p_value, 0.01));
    Ok(checks)
}

fn chaos_identity() -> Result<Vec<Check>> {
    let model = two_atom_model(0.0);
    let basis = build_basis(&model, 2)?;
    let p = basis.p().to_vec();
    let integrand = ChaosIntegrand::polynomial(2, move |s, y| (1.0 + s) * (p[0].eval(y) + p[1].eval(y)));
    let run = |n_steps| -> Result<_> {
        let grid = TimeGrid::new(1.0, n_steps)?;
        let paths = simulate_paths(&model, &basis, &grid, SEED, 100);
        Ok(chaos_identity_check(&model, &basis, &integrand, &paths))
    };
    let coarse = run(200)?;
    let fine = run(400)?;
    Ok(vec![
        Check::flag(
            "path_sim",
            "integrand lies in the truncated span",
            coarse.warning.is_none(),
            match &coarse.warning {
                Some(w) => format!("span defect {:.3e}", w.span_defect),
                None => "no truncation warning".to_string(),
            },
        ),
        Check::below("path_sim", "max per-path residual at Δt = 1/200", coarse.max_abs, 5e-2),
        Check::at_least("path_sim", "RMS residual shrink factor, Δt 1/200 → 1/400", coarse.rms / fine.rms, 1.5),
    ])
}

fn sci_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn max_error(spatial: &SpatialGrid, level: &[f64], oracle: impl Fn(f64) -> f64) -> f64 {
    (0..spatial.n_nodes())
        .map(|n| (level[n] - oracle(spatial.coords(n)[0])).abs())
        .fold(0.0, f64::max)
}

fn heat_setup() -> Result<(LevyModel, TeugelsBasis, FbsdeProblem, SpatialGrid)> {
    let model = LevyModel::brownian(1.0)?;
    let basis = build_basis(&model, 1)?;
    let problem = bump_problem(1, 1.0, 0.0, &[0.4]);
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 401)?;
    Ok((model, basis, problem, spatial))
}

fn heat_kernel(out: &OutputDir) -> Result<Vec<Check>> {
    let (model, basis, problem, spatial) = heat_setup()?;
    let config = SolverConfig {
        n_time: 200,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config)?;
    artifacts::write_theta(out, &sol, 20)?;
    let err = max_error(&spatial, sol.theta(0), |x| oracles::heat_bump(0.4, 1.0, x));
    Ok(vec![Check::below("pide_solver", "heat kernel max grid error", err, 1e-3)])
}

fn compensated_poisson() -> Result<Vec<Check>> {
    let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 1.0)]))?;
    let basis = build_basis(&model, 1)?;
    let kappa = 0.5;
    // σ_1 = κ / p_1(1) makes every jump move x by κ.
    let sigma = kappa / basis.eval_p(1.0)[0];
    let problem = bump_problem(1, 1.0, 0.0, &[sigma]);
    let spatial = SpatialGrid::uniform_1d(-10.0, 10.0, 401)?;
    let config = SolverConfig {
        n_time: 1000,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config)?;
    let err = max_error(&spatial, sol.theta(0), |x| oracles::poisson_bump(1.0, kappa, 1.0, x));
    Ok(vec![Check::below("pide_solver", "compensated Poisson max grid error", err, 1e-3)])
}

fn constant_solution() -> Result<Vec<Check>> {
    let model = two_atom_model(0.5);
    let basis = build_basis(&model, 2)?;
    let problem = FbsdeProblem::new(1, 1, 2, 1.0)?
        .with_drift(|_, x, _, _| vec![0.3 * x[0].sin()])
        .with_sigma(|_, x, y| vec![0.5 + 0.1 * x[0].cos(), 0.2 * y[0].tanh()])
        .with_terminal(|_| vec![3.25]);
    let spatial = SpatialGrid::uniform_1d(-6.0, 6.0, 121)?;
    let sol = solve_pide(&problem, &model, &basis, &spatial, &SolverConfig::default())?;
    let mut gap: f64 = 0.0;
    let mut z_gap: f64 = 0.0;
    for s in 0..=sol.time_grid().n_steps() {
        gap = sol.theta(s).iter().fold(gap, |a, v| a.max((v - 3.25).abs()));
        z_gap = sol.theta1(s).iter().fold(z_gap, |a, v| a.max(v.abs()));
    }
    Ok(vec![
        Check::below("pide_solver", "constant preservation max |θ − c|", gap, 1e-12),
        Check::below("pide_solver", "constant preservation max |θ⁽¹⁾|", z_gap, 1e-12),
    ])
}

fn fixed_point(out: &OutputDir) -> Result<Vec<Check>> {
    let model = two_atom_model(0.5);
    let basis = build_basis(&model, 2)?;
    let spatial = SpatialGrid::uniform_1d(-8.0, 8.0, 201)?;
    let config = SolverConfig {
        fp_max: 10,
        ..Default::default()
    };
    let mut checks = Vec::new();

    let short = solve_pide(&coupled_problem(0.1), &model, &basis, &spatial, &config)?;
    let log = &short.iteration_log()[0];
    let ratio = log.contraction_ratio().unwrap_or(f64::INFINITY);
    checks.push(Check::flag(
        "pide_solver",
        "T = 0.1 converges without splitting",
        short.iteration_log().len() == 1 && log.converged,
        format!("{} range(s)", short.iteration_log().len()),
    ));
    checks.push(Check::at_most("pide_solver", "T = 0.1 sweeps", log.residuals.len() as f64, 10.0));
    checks.push(Check::flag(
        "pide_solver",
        "T = 0.1 residuals strictly decrease",
        log.residuals.windows(2).all(|w| w[1] < w[0]),
        sci_list(&log.residuals),
    ));
    checks.push(Check::below("pide_solver", "T = 0.1 contraction ratio", ratio, 1.0));

    let long = solve_pide(&coupled_problem(1.0), &model, &basis, &spatial, &config)?;
    artifacts::write_iterations(out, &long)?;
    let mut pieces = long.subintervals();
    checks.push(Check::at_least("pide_solver", "T = 1 chained subintervals", pieces.len() as f64, 2.0));
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tiles = pieces.first().is_some_and(|p| p.0 == 0.0)
        && pieces.last().is_some_and(|p| (p.1 - 1.0).abs() < 1e-12)
        && pieces.windows(2).all(|w| (w[0].1 - w[1].0).abs() < 1e-12);
    checks.push(Check::flag("pide_solver", "T = 1 subintervals tile [0, T]", tiles, format!("{pieces:.4?}")));
    Ok(checks)
}

fn bsde_residuals(out: &OutputDir) -> Result<Vec<Check>> {
    let (model, basis, problem, spatial) = heat_setup()?;
    let config = SolverConfig {
        n_time: 400,
        ..Default::default()
    };
    let sol = solve_pide(&problem, &model, &basis, &spatial, &config)?;
    let coeffs = assemble_coefficients(&problem, &basis, &model)?;
    let mut checks = Vec::new();
    let mut rms = Vec::new();
    for n_steps in [100, 200, 400] {
        let grid = TimeGrid::new(1.0, n_steps)?;
        let paths = simulate_forward_paths(&sol, &coeffs, &model, &[0.0], &grid, SEED, 10_000)?;
        let report = residual_report(&paths, &coeffs)?;
        checks.push(Check::at_most(
            "fbsde_solver",
            &format!("Δt = 1/{n_steps}: escape rate"),
            report.escape_rate(),
            0.01,
        ));
        checks.push(Check::below(
            "fbsde_solver",
            &format!("Δt = 1/{n_steps}: |mean R| / SE"),
            z_score(report.mean[0], report.se[0]),
            4.0,
        ));
        rms.push(report.rms[0]);
        if n_steps == 400 {
            artifacts::write_residuals(out, &report, 1)?;
        }
    }
    checks.push(Check::flag(
        "fbsde_solver",
        "RMS(R) non-increasing over Δt = 1/100, 1/200, 1/400",
        rms.windows(2).all(|w| w[1] <= w[0]),
        sci_list(&rms),
    ));
    Ok(checks)
}

fn black_scholes_market() -> MarketModel {
    let (mu, s) = (0.08, 0.2);
    MarketModel::new(1, 1, 0.25, vec![100.0])
        .expect("valid market")
        .with_constant_rate(0.05)
        .with_log_drift(move |_, _, _, _| vec![mu - 0.5 * s * s])
        .with_log_sigma(move |_, _, _| vec![s])
        .with_payoff(Payoff::Call { strike: 100.0 })
}

fn log_grid() -> Result<SpatialGrid> {
    log_grid_with(401)
}

fn log_grid_with(n: usize) -> Result<SpatialGrid> {
    let c = 100f64.ln();
    Ok(SpatialGrid::uniform_1d(c - 2.0, c + 2.0, n)?)
}

fn black_scholes(out: &OutputDir) -> Result<Vec<Check>> {
    let model = LevyModel::brownian(1.0)?;
    let basis = build_basis(&model, 1)?;
    let result = price(&black_scholes_market(), &model, &basis, &log_grid()?, &SolverConfig::default())?;
    artifacts::write_surface(out, &result)?;
    let exact = oracles::black_scholes_call(100.0, 100.0, 0.05, 0.2, 0.25);
    Ok(vec![Check::below(
        "pricing",
        &format!("W0 = {:.6} vs closed form {exact:.6}: relative error", result.w0),
        (result.w0 - exact).abs() / exact,
        0.01,
    )])
}

fn jump_market() -> Result<Vec<Check>> {
    let (lambda, y0, kappa, r, t) = (1.5, 0.5, 0.2, 0.05, 0.5);
    let model = LevyModel::new(0.0, LevyMeasure::atomic([(y0, lambda)]))?;
    let basis = build_basis(&model, 1)?;
    let sigma = kappa / basis.eval_p(y0)[0];
    // Discounted prices are martingales under the model measure for this drift.
    let f = r - lambda * (kappa.exp() - 1.0 - kappa);
    let market = MarketModel::new(1, 1, t, vec![100.0])?
        .with_constant_rate(r)
        .with_log_drift(move |_, _, _, _| vec![f])
        .with_log_sigma(move |_, _, _| vec![sigma])
        .with_payoff(Payoff::Call { strike: 100.0 });
    let config = SolverConfig {
        n_time: 1000,
        ..Default::default()
    };
    let result = price(&market, &model, &basis, &log_grid()?, &config)?;
    let b = f - lambda * kappa;
    let exact = oracles::jump_call(100.0, 100.0, r, b, kappa, oracles::risk_neutral_intensity(r, b, kappa), t);
    // The series oracle is exact, so its standard error is zero and the 1% bound applies.
    Ok(vec![Check::below(
        "pricing",
        &format!("W0 = {:.6} vs terminal-law series {exact:.6}: relative error", result.w0),
        (result.w0 - exact).abs() / exact,
        0.01,
    )])
}

fn replication(out: &OutputDir) -> Result<Vec<Check>> {
    let model = LevyModel::brownian(1.0)?;
    let basis = build_basis(&model, 1)?;
    let market = black_scholes_market();
    // The initial wealth inherits the O(h²) pricing error, which at 401 nodes is comparable
    // to the Monte Carlo standard error of 1e4 paths.
    let config = SolverConfig {
        n_time: 800,
        ..Default::default()
    };
    let priced = price(&market, &model, &basis, &log_grid_with(1601)?, &config)?;
    let grid = TimeGrid::new(0.25, 200)?;
    let report = replication_check(&market, &model, &basis, &priced.solution, &grid, SEED, 10_000)?;
    artifacts::write_hedge(out, &report)?;
    Ok(vec![
        Check::at_most("pricing", "replication escape rate", report.escape_rate(), 0.01),
        Check::below(
            "pricing",
            &format!("|mean terminal error| / SE (mean {:.3e})", report.mean_error()),
            z_score(report.mean_error(), report.se_error()),
            4.0,
        ),
        Check::below("pricing", "max portfolio fit residual", report.max_fit_residual(), 1e-12),
    ])
}

/// Runs criteria 1 to 9 and writes their artifacts under `out`.
pub fn run_suite(out: &OutputDir) -> Result<Vec<Criterion>> {
    Ok(vec![
        timed("1", "orthogonality suite", 1, || orthogonality(out))?,
        timed("2", "martingale statistics", 30, || martingales(out))?,
        timed("3", "jump-sum chaos representation", 10, chaos_identity)?,
        timed("4a", "PIDE heat-kernel oracle", 60, || heat_kernel(out))?,
        timed("4b", "PIDE compensated-Poisson oracle", 60, compensated_poisson)?,
        timed("4c", "PIDE constant preservation", 60, constant_solution)?,
        timed("5", "fixed-point contraction and splitting", 120, || fixed_point(out))?,
        timed("6", "BSDE residual", 120, || bsde_residuals(out))?,
        timed("7", "Black–Scholes reduction", 30, || black_scholes(out))?,
        timed("8", "single-atom jump pricing", 60, jump_market)?,
        timed("9", "replication", 120, || replication(out))?,
    ])
}

/// Renders the suite outcome; timings are left out when the output must be reproducible.
pub fn render(criteria: &[Criterion], with_timings: bool) -> String {
    let mut text = String::new();
    for c in criteria {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        let _ = write!(text, "[{tag}] {} {}", c.id, c.title);
        if with_timings {
            let _ = write!(text, " ({:.2} s, budget {} s)", c.elapsed.as_secs_f64(), c.budget.as_secs());
        } else if !c.within_budget() {
            let _ = write!(text, " (over the {} s budget)", c.budget.as_secs());
        }
        text.push('\n');
        for check in &c.checks {
            let _ = writeln!(text, "    {check}");
        }
    }
    text
}

pub fn verify_all(out: &OutputDir) -> Result<Report> {
    let criteria = run_suite(out)?;
    out.text("verify_report.txt", &render(&criteria, !out.deterministic()))?;
    let mut report = Report {
        lines: render(&criteria, !out.deterministic()).lines().map(str::to_string).collect(),
        checks_in_lines: true,
        ..Default::default()
    };
    for c in &criteria {
        report.checks.extend(c.checks.iter().cloned());
        if !c.within_budget() {
            report.checks.push(Check::below(
                "cli",
                &format!("criterion {} runtime in seconds", c.id),
                c.elapsed.as_secs_f64(),
                c.budget.as_secs_f64(),
            ));
        }
    }
    Ok(report)
}
