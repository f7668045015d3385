//! The decoupling field θ of a coupled FBSDE, as the solution of the final-value problem
//!
//! `∂_t θ + f·∇θ + β:∇²θ + ∫ [θ(x + δ) − θ − ∇θ·δ] ν(dy) + g = 0`, `θ(T) = h`,
//!
//! with coefficients evaluated at `y = θ` and `z = θ⁽¹⁾`, where
//! `θ⁽¹⁾_i = ∫ [θ(x + δ) − θ] p_i ν(dy) + c_i^k ∂_k θ`.
//!
//! The nonlinearity is handled by Picard iteration: each sweep freezes the coefficients at the
//! previous iterate ρ and solves the resulting linear problem backward in time. The linear step is
//! an IMEX θ-scheme, implicit in the local operator (convection and diffusion) and explicit in the
//! jump integral and in `g`. When the iteration fails to settle, the time range is bisected and
//! the halves are solved backward in turn.

mod coefficients;
mod grid;
mod linalg;
mod problem;

use rayon::prelude::*;

pub use coefficients::{assemble_coefficients, CoefficientSet};
pub use grid::{GridAxis, SpatialGrid, MIN_POINTS};
pub use problem::{DriverFn, FbsdeProblem, TerminalFn, VolatilityFn, MAX_DIM};

use crate::error::{FbsdeError, Result};
use crate::levy_model::LevyModel;
use crate::path_sim::TimeGrid;
use crate::teugels::TeugelsBasis;
use linalg::{BandMatrix, CsrMatrix};

/// Per node: operator row entries, post-jump coordinates and driver values.
type NodeRow = (Vec<(usize, f64)>, Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// `f` and `g` may not read `z`.
    Strict,
    /// `f` and `g` receive `z = θ⁽¹⁾(ρ)` of the previous iterate.
    Extended,
}

impl SolverMode {
    pub fn label(self) -> &'static str {
        match self {
            SolverMode::Strict => "strict",
            SolverMode::Extended => "extended",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Sup-norm change between sweeps below which the iteration stops.
    pub fp_tol: f64,
    /// Sweeps per time range before it is bisected.
    pub fp_max: usize,
    /// Implicit weight of the local operator: 1 is backward Euler, 0.5 Crank–Nicolson.
    pub theta_scheme: f64,
    /// Requested number of time steps on `[0, T]`; raised if the jump bound requires it.
    pub n_time: usize,
    /// Shortest time range the bisection may produce.
    pub min_dt_split: f64,
    pub mode: SolverMode,
    /// Upper bound on `Δt · ν(ℝ)` for the explicit jump term.
    pub jump_cfl: f64,
    /// Relative residual target of the iterative linear solver (two-dimensional grids).
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            fp_tol: 1e-8,
            fp_max: 50,
            theta_scheme: 1.0,
            n_time: 200,
            min_dt_split: 1e-4,
            mode: SolverMode::Extended,
            jump_cfl: 0.5,
            linear_tol: 1e-13,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(FbsdeError::InvalidConfig(format!("{key}: {why}")));
        if !(self.fp_tol > 0.0) {
            return bad("fp_tol", format!("{} must be positive", self.fp_tol));
        }
        if self.fp_max == 0 {
            return bad("fp_max", "must be at least 1".into());
        }
        if !(0.5..=1.0).contains(&self.theta_scheme) {
            return bad(
                "theta_scheme",
                format!("{} outside [0.5, 1]", self.theta_scheme),
            );
        }
        if self.n_time == 0 {
            return bad("n_time", "must be at least 1".into());
        }
        if !(self.min_dt_split > 0.0) {
            return bad("min_dt_split", format!("{} must be positive", self.min_dt_split));
        }
        if !(self.jump_cfl > 0.0) {
            return bad("jump_cfl", format!("{} must be positive", self.jump_cfl));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return bad("linear_tol", format!("{} outside (0, 1)", self.linear_tol));
        }
        Ok(())
    }
}

/// Outer iteration record for one time range.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLog {
    pub t_start: f64,
    pub t_end: f64,
    /// Sup-norm change produced by each sweep.
    pub residuals: Vec<f64>,
    /// False when the range was abandoned and bisected.
    pub converged: bool,
}

impl SweepLog {
    /// Geometric mean of the last (up to three) ratios of successive non-zero residuals.
    pub fn contraction_ratio(&self) -> Option<f64> {
        let positive: Vec<f64> = self
            .residuals
            .iter()
            .copied()
            .take_while(|r| *r > 0.0 && r.is_finite())
            .collect();
        if positive.len() < 2 {
            return None;
        }
        let ratios: Vec<f64> = positive.windows(2).map(|w| w[1] / w[0]).collect();
        let tail = &ratios[ratios.len().saturating_sub(3)..];
        let log_mean = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
        Some(log_mean.exp())
    }
}

/// How close the jump targets `x + δ` come to leaving the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainDiagnostics {
    /// Largest `|δ_k|` over half the extent of axis `k`.
    pub max_jump_ratio: f64,
    /// Share of jump targets, over all nodes and time levels, that fell outside the box.
    pub clamped_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct PideSolution {
    spatial: SpatialGrid,
    time: TimeGrid,
    q: usize,
    m: usize,
    theta: Vec<Vec<f64>>,
    theta1: Vec<Vec<f64>>,
    log: Vec<SweepLog>,
    mode: SolverMode,
    tail_indicator: f64,
    domain: DomainDiagnostics,
    lipschitz_probe: f64,
}

impl PideSolution {
    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// θ at time level `s`, node-major with `Q` components per node.
    pub fn theta(&self, s: usize) -> &[f64] {
        &self.theta[s]
    }

    /// θ⁽¹⁾ at time level `s`, node-major with `Q × M` row-major entries per node.
    pub fn theta1(&self, s: usize) -> &[f64] {
        &self.theta1[s]
    }

    pub fn iteration_log(&self) -> &[SweepLog] {
        &self.log
    }

    /// Time ranges whose iteration converged, in backward order.
    pub fn subintervals(&self) -> Vec<(f64, f64)> {
        self.log
            .iter()
            .filter(|l| l.converged)
            .map(|l| (l.t_start, l.t_end))
            .collect()
    }

    /// Total number of sweeps, including abandoned ranges.
    pub fn total_sweeps(&self) -> usize {
        self.log.iter().map(|l| l.residuals.len()).sum()
    }

    pub fn mode(&self) -> SolverMode {
        self.mode
    }

    /// Share of `x² ν` outside the truncated basis, echoed from the basis.
    pub fn tail_indicator(&self) -> f64 {
        self.tail_indicator
    }

    pub fn domain(&self) -> DomainDiagnostics {
        self.domain
    }

    /// Largest finite-difference slope of `f`, `σ` and `g` in `x` over the grid at `t = 0`.
    pub fn lipschitz_probe(&self) -> f64 {
        self.lipschitz_probe
    }

    fn in_time(&self, levels: &[Vec<f64>], ncomp: usize, t: f64, x: &[f64]) -> Vec<f64> {
        let n = self.time.n_steps();
        let u = (t / self.time.dt()).clamp(0.0, n as f64);
        let s = (u.floor() as usize).min(n.saturating_sub(1));
        let w = u - s as f64;
        let mut lo = vec![0.0; ncomp];
        self.spatial.interpolate(&levels[s], ncomp, x, &mut lo);
        if w == 0.0 {
            return lo;
        }
        let mut hi = vec![0.0; ncomp];
        self.spatial.interpolate(&levels[s + 1], ncomp, x, &mut hi);
        lo.iter().zip(&hi).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// θ(t, x) by multilinear interpolation in space and linear interpolation in time.
    pub fn theta_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.in_time(&self.theta, self.q, t, x)
    }

    /// θ⁽¹⁾(t, x), `Q × M` row-major.
    pub fn theta1_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.in_time(&self.theta1, self.q * self.m, t, x)
    }
}

/// θ⁽¹⁾ at every node of a θ snapshot at time `t`, with `δ`, `c` evaluated at `y = θ`.
/// Returns node-major `Q × M` row-major entries.
pub fn theta1_from_theta(
    spatial: &SpatialGrid,
    t: f64,
    theta: &[f64],
    coeffs: &CoefficientSet,
) -> Vec<f64> {
    let q = coeffs.problem().q();
    (0..spatial.n_nodes())
        .into_par_iter()
        .flat_map_iter(|node| {
            let x = spatial.coords(node);
            let y = &theta[node * q..(node + 1) * q];
            let sigma = coeffs.sigma(t, &x, y);
            theta1_at_node(spatial, theta, coeffs, node, &x, &sigma, &mut None)
        })
        .collect()
}

fn theta1_at_node(
    spatial: &SpatialGrid,
    field: &[f64],
    coeffs: &CoefficientSet,
    node: usize,
    x: &[f64],
    sigma: &[f64],
    clamp_count: &mut Option<&mut usize>,
) -> Vec<f64> {
    let q = coeffs.problem().q();
    let m = coeffs.m();
    let p = coeffs.p();
    let mut out = vec![0.0; q * m];
    let here = &field[node * q..(node + 1) * q];
    let mut target = vec![0.0; p];
    let mut value = vec![0.0; q];
    for (w, atom) in coeffs.jump_nodes().iter().enumerate() {
        let delta = coeffs.delta_at_node(sigma, w);
        for k in 0..p {
            target[k] = x[k] + delta[k];
        }
        if spatial.interpolate(field, q, &target, &mut value) {
            if let Some(count) = clamp_count.as_deref_mut() {
                *count += 1;
            }
        }
        let pw = coeffs.p_at_node(w);
        for c in 0..q {
            let diff = atom.weight * (value[c] - here[c]);
            for i in 0..m {
                out[c * m + i] += diff * pw[i];
            }
        }
    }
    let cmat = coeffs.c_from_sigma(sigma);
    for c in 0..q {
        for k in 0..p {
            let grad = spatial.derivative(field, q, c, k, node);
            if grad == 0.0 {
                continue;
            }
            for i in 0..m {
                out[c * m + i] += cmat[k * m + i] * grad;
            }
        }
    }
    out
}

/// Frozen coefficients at one time level, per node.
struct Level {
    /// Off-diagonal entries of the local operator row; the diagonal is minus their sum.
    rows: Vec<Vec<(usize, f64)>>,
    /// Jump targets `x + δ_w`, node-major, `W × P` per node.
    targets: Vec<f64>,
    /// `g`, node-major with `Q` per node.
    g: Vec<f64>,
}

struct Solver<'a> {
    coeffs: &'a CoefficientSet,
    spatial: &'a SpatialGrid,
    config: &'a SolverConfig,
    time: TimeGrid,
    coords: Vec<Vec<f64>>,
    use_z: bool,
}

impl Solver<'_> {
    fn q(&self) -> usize {
        self.coeffs.problem().q()
    }

    fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    fn level(&self, s: usize, rho: &[f64]) -> Result<Level> {
        let t = self.time.time(s);
        let problem = self.coeffs.problem();
        let p = problem.p();
        let q = problem.q();
        let m = problem.m();
        let n_jump = self.coeffs.jump_nodes().len();
        let axes = self.spatial.axes();

        let per_node: Vec<Result<NodeRow>> = (0..self.n_nodes())
            .into_par_iter()
            .map(|node| {
                let x = &self.coords[node];
                let y = &rho[node * q..(node + 1) * q];
                let sigma = self.coeffs.sigma(t, x, y);
                let z = if self.use_z {
                    theta1_at_node(self.spatial, rho, self.coeffs, node, x, &sigma, &mut None)
                } else {
                    vec![0.0; q * m]
                };
                let mut targets = Vec::with_capacity(n_jump * p);
                for w in 0..n_jump {
                    let delta = self.coeffs.delta_at_node(&sigma, w);
                    for k in 0..p {
                        if delta[k].abs() > axes[k].half_extent() {
                            return Err(FbsdeError::GridTooSmall {
                                axis: k,
                                displacement: delta[k],
                                half_extent: axes[k].half_extent(),
                            });
                        }
                        targets.push(x[k] + delta[k]);
                    }
                }
                let drift = problem.drift(t, x, y, &z);
                let mean_jump = self.coeffs.delta_mean_from_sigma(&sigma);
                let beta = self.coeffs.beta_from_sigma(&sigma);
                let mut row = Vec::with_capacity(12);
                for k in 0..p {
                    let b = drift[k] - mean_jump[k];
                    if b != 0.0 {
                        for (col, wgt) in self.spatial.first_derivative_stencil(k, node) {
                            if col != node {
                                row.push((col, b * wgt));
                            }
                        }
                    }
                    let bkk = beta[k * p + k];
                    if bkk != 0.0 {
                        for (col, wgt) in self.spatial.second_derivative_stencil(k, node) {
                            if col != node {
                                row.push((col, bkk * wgt));
                            }
                        }
                    }
                    for l in (k + 1)..p {
                        let bkl = beta[k * p + l] + beta[l * p + k];
                        if bkl != 0.0 {
                            for (col, wgt) in self.spatial.mixed_stencil(k, l, node) {
                                if col != node {
                                    row.push((col, bkl * wgt));
                                }
                            }
                        }
                    }
                }
                let g = problem.driver(t, x, y, &z);
                if g.iter().chain(&drift).chain(&sigma).any(|v| !v.is_finite()) {
                    return Err(FbsdeError::NoConvergence {
                        t_start: t,
                        t_end: t,
                        reason: format!("non-finite coefficients at x = {x:?}"),
                    });
                }
                Ok((row, targets, g))
            })
            .collect();

        let mut level = Level {
            rows: Vec::with_capacity(self.n_nodes()),
            targets: Vec::with_capacity(self.n_nodes() * n_jump * p),
            g: Vec::with_capacity(self.n_nodes() * q),
        };
        for item in per_node {
            let (row, targets, g) = item?;
            level.rows.push(row);
            level.targets.extend(targets);
            level.g.extend(g);
        }
        Ok(level)
    }

    /// `θ^s` from `θ^{s+1}` with coefficients frozen in `level`.
    fn step(&self, level: &Level, next: &[f64]) -> Result<Vec<f64>> {
        let q = self.q();
        let p = self.coeffs.p();
        let n = self.n_nodes();
        let dt = self.time.dt();
        let theta_w = self.config.theta_scheme;
        let atoms = self.coeffs.jump_nodes();

        // Right-hand side of (I − ϑΔt L) d = Δt (L θ^{s+1} + J θ^{s+1} + g), d = θ^s − θ^{s+1}.
        let rhs: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|node| {
                let here = &next[node * q..(node + 1) * q];
                let mut acc = level.g[node * q..(node + 1) * q].to_vec();
                for &(col, wgt) in &level.rows[node] {
                    for c in 0..q {
                        acc[c] += wgt * (next[col * q + c] - here[c]);
                    }
                }
                let mut value = vec![0.0; q];
                let base = node * atoms.len() * p;
                for (w, atom) in atoms.iter().enumerate() {
                    let target = &level.targets[base + w * p..base + (w + 1) * p];
                    self.spatial.interpolate(next, q, target, &mut value);
                    for c in 0..q {
                        acc[c] += atom.weight * (value[c] - here[c]);
                    }
                }
                acc.into_iter().map(move |v| dt * v)
            })
            .collect();

        let mut theta = next.to_vec();
        if rhs.iter().all(|v| *v == 0.0) {
            return Ok(theta);
        }
        let scale = theta_w * dt;
        if self.spatial.dim() == 1 {
            let mut band = BandMatrix::zeros(n, 3, 3);
            for (node, row) in level.rows.iter().enumerate() {
                let mut diag = 1.0;
                for &(col, wgt) in row {
                    band.add(node, col, -scale * wgt);
                    diag += scale * wgt;
                }
                band.add(node, node, diag);
            }
            if !band.factor() {
                return Err(FbsdeError::NoConvergence {
                    t_start: 0.0,
                    t_end: self.time.horizon(),
                    reason: "singular implicit system".into(),
                });
            }
            let mut col = vec![0.0; n];
            for c in 0..q {
                for node in 0..n {
                    col[node] = rhs[node * q + c];
                }
                band.solve(&mut col);
                for node in 0..n {
                    theta[node * q + c] += col[node];
                }
            }
        } else {
            let rows = level
                .rows
                .iter()
                .enumerate()
                .map(|(node, row)| {
                    let mut out = Vec::with_capacity(row.len() + 1);
                    let mut diag = 1.0;
                    for &(col, wgt) in row {
                        out.push((col, -scale * wgt));
                        diag += scale * wgt;
                    }
                    out.push((node, diag));
                    out
                })
                .collect();
            let matrix = CsrMatrix::from_rows(rows);
            let mut b = vec![0.0; n];
            for c in 0..q {
                for node in 0..n {
                    b[node] = rhs[node * q + c];
                }
                let mut x = vec![0.0; n];
                let rel = matrix.bicgstab(&b, &mut x, self.config.linear_tol, 10 * n);
                if !(rel <= 1e-8) {
                    return Err(FbsdeError::NoConvergence {
                        t_start: 0.0,
                        t_end: self.time.horizon(),
                        reason: format!("linear solver stalled at relative residual {rel:e}"),
                    });
                }
                for node in 0..n {
                    theta[node * q + c] += x[node];
                }
            }
        }
        Ok(theta)
    }

    /// One Picard sweep over levels `lo..=hi`; `rho[j]` is the iterate at level `lo + j`.
    fn sweep(&self, lo: usize, rho: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let span = rho.len() - 1;
        let mut out = vec![Vec::new(); span + 1];
        out[span] = rho[span].clone();
        for j in (0..span).rev() {
            let level = self.level(lo + j, &rho[j])?;
            out[j] = self.step(&level, &out[j + 1])?;
        }
        Ok(out)
    }

    /// Levels `lo..=hi` given θ at level `hi`; appends to `log`, splitting on failure.
    fn solve_range(
        &self,
        lo: usize,
        hi: usize,
        terminal: Vec<f64>,
        log: &mut Vec<SweepLog>,
    ) -> Result<Vec<Vec<f64>>> {
        let t_start = self.time.time(lo);
        let t_end = self.time.time(hi);
        let mut rho = vec![terminal; hi - lo + 1];
        let mut entry = SweepLog {
            t_start,
            t_end,
            residuals: Vec::new(),
            converged: false,
        };
        for _ in 0..self.config.fp_max {
            let next = self.sweep(lo, &rho)?;
            let change = next
                .iter()
                .zip(&rho)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
                .fold(0.0, |acc: f64, d| if d.is_nan() { f64::INFINITY } else { acc.max(d) });
            entry.residuals.push(change);
            rho = next;
            if change < self.config.fp_tol {
                entry.converged = true;
                break;
            }
            if !change.is_finite() {
                break;
            }
        }
        let converged = entry.converged;
        let last = entry.residuals.last().copied().unwrap_or(f64::NAN);
        log.push(entry);
        if converged {
            return Ok(rho);
        }

        let mid = (lo + hi) / 2;
        let half = 0.5 * (t_end - t_start);
        if hi - lo < 2 || half < self.config.min_dt_split {
            return Err(FbsdeError::NoConvergence {
                t_start,
                t_end,
                reason: format!(
                    "{} sweeps left a change of {last:e}; range cannot be split below {}",
                    self.config.fp_max, self.config.min_dt_split
                ),
            });
        }
        let terminal = rho.pop().expect("non-empty range");
        let upper = self.solve_range(mid, hi, terminal, log)?;
        let lower = self.solve_range(lo, mid, upper[0].clone(), log)?;
        let mut levels = lower;
        levels.extend(upper.into_iter().skip(1));
        Ok(levels)
    }
}

/// Largest finite-difference slope in `x` of `f`, `σ` and `g` at `t = 0`, `y = h(x)`, `z = 0`.
fn lipschitz_probe(problem: &FbsdeProblem, spatial: &SpatialGrid) -> f64 {
    let z = vec![0.0; problem.q() * problem.m()];
    let eval = |x: &[f64]| -> Vec<f64> {
        let y = problem.terminal(x);
        let mut v = problem.drift(0.0, x, &y, &z);
        v.extend(problem.sigma(0.0, x, &y));
        v.extend(problem.driver(0.0, x, &y, &z));
        v
    };
    (0..spatial.n_nodes())
        .into_par_iter()
        .map(|node| {
            let idx = spatial.multi_index(node);
            let x = spatial.coords(node);
            let here = eval(&x);
            let mut worst: f64 = 0.0;
            for (k, axis) in spatial.axes().iter().enumerate() {
                if idx[k] + 1 == axis.n {
                    continue;
                }
                let h = axis.spacing();
                let mut xr = x.clone();
                xr[k] += h;
                for (a, b) in eval(&xr).iter().zip(&here) {
                    worst = worst.max((a - b).abs() / h);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Solves the final-value problem on `spatial × [0, T]`.
pub fn solve_pide(
    problem: &FbsdeProblem,
    model: &LevyModel,
    basis: &TeugelsBasis,
    spatial: &SpatialGrid,
    config: &SolverConfig,
) -> Result<PideSolution> {
    config.validate()?;
    if spatial.dim() != problem.p() {
        return Err(FbsdeError::InvalidConfig(format!(
            "grid has {} dimensions but the problem has P = {}",
            spatial.dim(),
            problem.p()
        )));
    }
    if config.mode == SolverMode::Strict && problem.is_z_dependent() {
        return Err(FbsdeError::InvalidProblem(
            "strict mode requires f and g independent of z".into(),
        ));
    }
    let coeffs = assemble_coefficients(problem, basis, model)?;
    let coords: Vec<Vec<f64>> = (0..spatial.n_nodes()).map(|n| spatial.coords(n)).collect();
    problem.validate_at(&coords[0])?;
    let probe = lipschitz_probe(problem, spatial);
    if !probe.is_finite() {
        return Err(FbsdeError::InvalidProblem(
            "coefficients are not Lipschitz on the grid (non-finite slope)".into(),
        ));
    }

    let horizon = problem.horizon();
    let mass = model.jump_intensity();
    let cfl_steps = (horizon * mass / config.jump_cfl).ceil() as usize;
    let time = TimeGrid::new(horizon, config.n_time.max(cfl_steps))?;
    let solver = Solver {
        coeffs: &coeffs,
        spatial,
        config,
        time,
        coords,
        use_z: config.mode == SolverMode::Extended && problem.is_z_dependent(),
    };

    let q = problem.q();
    let terminal: Vec<f64> = solver
        .coords
        .iter()
        .flat_map(|x| problem.terminal(x))
        .collect();
    let mut log = Vec::new();
    let theta = solver.solve_range(0, time.n_steps(), terminal, &mut log)?;

    let n = spatial.n_nodes();
    let m = problem.m();
    let mut clamped = 0usize;
    let mut max_ratio: f64 = 0.0;
    let mut theta1 = Vec::with_capacity(theta.len());
    for (s, level) in theta.iter().enumerate() {
        let t = time.time(s);
        let per_node: Vec<(Vec<f64>, usize, f64)> = (0..n)
            .into_par_iter()
            .map(|node| {
                let x = &solver.coords[node];
                let sigma = coeffs.sigma(t, x, &level[node * q..(node + 1) * q]);
                let mut count = 0usize;
                let z = theta1_at_node(spatial, level, &coeffs, node, x, &sigma, &mut Some(&mut count));
                let mut ratio: f64 = 0.0;
                for w in 0..coeffs.jump_nodes().len() {
                    for (k, d) in coeffs.delta_at_node(&sigma, w).iter().enumerate() {
                        ratio = ratio.max(d.abs() / spatial.axes()[k].half_extent());
                    }
                }
                (z, count, ratio)
            })
            .collect();
        let mut flat = Vec::with_capacity(n * q * m);
        for (z, count, ratio) in per_node {
            flat.extend(z);
            clamped += count;
            max_ratio = max_ratio.max(ratio);
        }
        theta1.push(flat);
    }
    let targets = theta.len() * n * coeffs.jump_nodes().len();
    let clamped_fraction = if targets == 0 {
        0.0
    } else {
        clamped as f64 / targets as f64
    };

    Ok(PideSolution {
        spatial: spatial.clone(),
        time,
        q,
        m,
        theta,
        theta1,
        log,
        mode: config.mode,
        tail_indicator: basis.tail_indicator(),
        domain: DomainDiagnostics {
            max_jump_ratio: max_ratio,
            clamped_fraction,
        },
        lipschitz_probe: probe,
    })
}
