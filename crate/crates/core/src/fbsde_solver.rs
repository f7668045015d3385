//! Forward simulation of the decoupled FBSDE: Euler steps for `X` driven by the `H⁽ⁱ⁾`
//! increments, `Y_s = θ(t_s, X_s)`, `Z_s = θ⁽¹⁾(t_s, X_s)` on `(t_s, t_{s+1}]`, and the pathwise
//! defect of the backward equation.

use rayon::prelude::*;

use crate::error::{FbsdeError, Result};
use crate::levy_model::LevyModel;
use crate::path_sim::{sample_path, RngSpec, SamplePath, TimeGrid};
use crate::pide_solver::{CoefficientSet, PideSolution};

/// Where a path first left the PIDE grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Escape {
    pub time: f64,
    pub step: usize,
}

/// One forward path. Arrays are flattened by time: `X` and `Y` have `n_steps + 1` rows, `Z`,
/// the drift and `σ` one row per step. A path that escaped the grid stops at the escape step.
#[derive(Debug, Clone, PartialEq)]
pub struct FbsdePath {
    base: SamplePath,
    p: usize,
    q: usize,
    m: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    drift: Vec<f64>,
    sigma: Vec<f64>,
    escape: Option<Escape>,
}

impl FbsdePath {
    pub fn base(&self) -> &SamplePath {
        &self.base
    }

    pub fn grid(&self) -> &TimeGrid {
        self.base.grid()
    }

    /// Number of states stored (`n_steps + 1` for a complete path).
    pub fn len(&self) -> usize {
        self.x.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self, s: usize) -> &[f64] {
        &self.x[s * self.p..(s + 1) * self.p]
    }

    pub fn y(&self, s: usize) -> &[f64] {
        &self.y[s * self.q..(s + 1) * self.q]
    }

    /// `Q × M` row-major, used over `(t_s, t_{s+1}]`.
    pub fn z(&self, s: usize) -> &[f64] {
        let w = self.q * self.m;
        &self.z[s * w..(s + 1) * w]
    }

    /// Mutable `Y` values, for building perturbed candidates.
    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    /// Mutable `Z` values, for building perturbed candidates.
    pub fn z_mut(&mut self) -> &mut [f64] {
        &mut self.z
    }

    /// Drift `f` used on step `s`.
    pub fn drift(&self, s: usize) -> &[f64] {
        &self.drift[s * self.p..(s + 1) * self.p]
    }

    /// `σ` (row-major `P × M`) used on step `s`.
    pub fn sigma(&self, s: usize) -> &[f64] {
        let w = self.p * self.m;
        &self.sigma[s * w..(s + 1) * w]
    }

    pub fn escape(&self) -> Option<Escape> {
        self.escape
    }

    pub fn is_complete(&self) -> bool {
        self.escape.is_none()
    }

    fn require_complete(&self) -> Result<()> {
        match self.escape {
            Some(e) => Err(FbsdeError::DomainEscape {
                time: e.time,
                step: e.step,
            }),
            None => Ok(()),
        }
    }
}

/// Simulates `X`, `Y`, `Z` along a given driving path, starting from `x0`.
pub fn simulate_forward_on(
    solution: &PideSolution,
    coeffs: &CoefficientSet,
    x0: &[f64],
    base: SamplePath,
) -> Result<FbsdePath> {
    let problem = coeffs.problem();
    let (p, q, m) = (problem.p(), problem.q(), problem.m());
    if x0.len() != p {
        return Err(FbsdeError::InvalidProblem(format!(
            "x0 has {} components, expected P = {p}",
            x0.len()
        )));
    }
    if base.order() != m {
        return Err(FbsdeError::BasisMismatch {
            basis: base.order(),
            problem: m,
        });
    }
    if (base.grid().horizon() - problem.horizon()).abs() > 1e-12 * problem.horizon() {
        return Err(FbsdeError::InvalidConfig(format!(
            "path horizon {} differs from the problem horizon {}",
            base.grid().horizon(),
            problem.horizon()
        )));
    }
    let grid = *base.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let spatial = solution.spatial();

    let mut path = FbsdePath {
        base,
        p,
        q,
        m,
        x: Vec::with_capacity((n + 1) * p),
        y: Vec::with_capacity((n + 1) * q),
        z: Vec::with_capacity(n * q * m),
        drift: Vec::with_capacity(n * p),
        sigma: Vec::with_capacity(n * p * m),
        escape: None,
    };
    if !spatial.contains(x0) {
        return Err(FbsdeError::DomainEscape { time: 0.0, step: 0 });
    }
    let mut x = x0.to_vec();
    for s in 0..n {
        let t = grid.time(s);
        let y = solution.theta_at(t, &x);
        let z = solution.theta1_at(t, &x);
        let drift = problem.drift(t, &x, &y, &z);
        let sigma = coeffs.sigma(t, &x, &y);
        let dh = path.base.dh(s);
        let mut next = x.clone();
        for k in 0..p {
            let noise: f64 = sigma[k * m..(k + 1) * m]
                .iter()
                .zip(dh)
                .map(|(a, b)| a * b)
                .sum();
            next[k] += drift[k] * dt + noise;
        }
        path.x.extend_from_slice(&x);
        path.y.extend(y);
        path.z.extend(z);
        path.drift.extend(drift);
        path.sigma.extend(sigma);
        x = next;
        if !spatial.contains(&x) || x.iter().any(|v| !v.is_finite()) {
            path.escape = Some(Escape {
                time: grid.time(s + 1),
                step: s + 1,
            });
            return Ok(path);
        }
    }
    let y = solution.theta_at(grid.horizon(), &x);
    path.x.extend_from_slice(&x);
    path.y.extend(y);
    Ok(path)
}

/// Samples a driving path from `rng` and simulates along it.
pub fn simulate_forward(
    solution: &PideSolution,
    coeffs: &CoefficientSet,
    model: &LevyModel,
    x0: &[f64],
    grid: &TimeGrid,
    rng: RngSpec,
) -> Result<FbsdePath> {
    let base = sample_path(model, coeffs.basis(), grid, rng);
    simulate_forward_on(solution, coeffs, x0, base)
}

/// `n_paths` forward paths on streams `0..n_paths` of `seed`, in stream order.
pub fn simulate_forward_paths(
    solution: &PideSolution,
    coeffs: &CoefficientSet,
    model: &LevyModel,
    x0: &[f64],
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<FbsdePath>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| {
            simulate_forward(solution, coeffs, model, x0, grid, RngSpec::new(seed, stream))
        })
        .collect()
}

/// `R = Y_0 − h(X_T) − Σ_s g(t_s, X_s, Y_s, Z_s) Δt + Σ_s Z_s dH_s`.
pub fn bsde_residual(path: &FbsdePath, coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    path.require_complete()?;
    let problem = coeffs.problem();
    let grid = path.grid();
    let (q, m) = (path.q, path.m);
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut r = path.y(0).to_vec();
    for (acc, hv) in r.iter_mut().zip(problem.terminal(path.x(n))) {
        *acc -= hv;
    }
    for s in 0..n {
        let g = problem.driver(grid.time(s), path.x(s), path.y(s), path.z(s));
        let z = path.z(s);
        let dh = path.base.dh(s);
        for c in 0..q {
            let mart: f64 = z[c * m..(c + 1) * m].iter().zip(dh).map(|(a, b)| a * b).sum();
            r[c] += mart - g[c] * dt;
        }
    }
    Ok(r)
}

/// Largest gap, over all jumps, between the jump part of `ΔX` on a step and
/// `Σ δ(t_s, X_s, Y_s, ΔL)` over the jumps of that step.
pub fn jump_consistency(path: &FbsdePath, coeffs: &CoefficientSet) -> f64 {
    let basis = coeffs.basis();
    let grid = path.grid();
    let dt = grid.dt();
    let (p, m) = (path.p, path.m);
    let steps = path.len().saturating_sub(1);
    let mut worst: f64 = 0.0;
    for s in 0..steps {
        let jumps = path.base.jumps(s);
        if jumps.is_empty() {
            continue;
        }
        let sigma = path.sigma(s);
        let drift = path.drift(s);
        let db = path.base.db()[s];
        for k in 0..p {
            let continuous: f64 = (0..m)
                .map(|i| sigma[k * m + i] * (basis.q0()[i] * db - dt * basis.p_means()[i]))
                .sum();
            let realized = path.x(s + 1)[k] - path.x(s)[k] - drift[k] * dt - continuous;
            let predicted: f64 = jumps
                .iter()
                .map(|j| coeffs.delta_from_sigma(sigma, j.size)[k])
                .sum();
            worst = worst.max((realized - predicted).abs());
        }
    }
    worst
}

/// Residual statistics over a set of paths; escaped paths are excluded and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub n_paths: usize,
    pub n_escaped: usize,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub rms: Vec<f64>,
    /// Per-path residuals; `None` for escaped paths.
    pub residuals: Vec<Option<Vec<f64>>>,
}

/// Largest share of escaped paths a run may have.
pub const MAX_ESCAPE_RATE: f64 = 0.01;

impl ResidualReport {
    pub fn escape_rate(&self) -> f64 {
        if self.n_paths == 0 {
            0.0
        } else {
            self.n_escaped as f64 / self.n_paths as f64
        }
    }

    /// `|mean| ≤ 4 SE` per component and the escape rate within bounds.
    pub fn passes(&self) -> bool {
        self.escape_rate() <= MAX_ESCAPE_RATE
            && self
                .mean
                .iter()
                .zip(&self.se)
                .all(|(m, se)| m.abs() <= crate::path_sim::Z_FLAG * se)
    }
}

pub fn residual_report(paths: &[FbsdePath], coeffs: &CoefficientSet) -> Result<ResidualReport> {
    let q = coeffs.problem().q();
    let residuals: Vec<Option<Vec<f64>>> = paths
        .par_iter()
        .map(|path| match bsde_residual(path, coeffs) {
            Ok(r) => Ok(Some(r)),
            Err(FbsdeError::DomainEscape { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let kept: Vec<&Vec<f64>> = residuals.iter().flatten().collect();
    let n = kept.len();
    let mut mean = vec![0.0; q];
    let mut se = vec![0.0; q];
    let mut rms = vec![0.0; q];
    if n > 0 {
        for c in 0..q {
            let mu = kept.iter().map(|r| r[c]).sum::<f64>() / n as f64;
            let sq = kept.iter().map(|r| r[c] * r[c]).sum::<f64>() / n as f64;
            let var = if n > 1 {
                kept.iter().map(|r| (r[c] - mu).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            mean[c] = mu;
            se[c] = (var / n as f64).sqrt();
            rms[c] = sq.sqrt();
        }
    }
    Ok(ResidualReport {
        n_paths: paths.len(),
        n_escaped: paths.len() - n,
        mean,
        se,
        rms,
        residuals,
    })
}

/// Distance of a candidate `(Y, Z)` from the decoupling field along the candidate's own `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessReport {
    /// `sup_s |Y_s − θ(t_s, X_s)|`.
    pub y_gap: f64,
    /// `(Σ_s |Z_s − θ⁽¹⁾(t_s, X_s)|² Δt)^{1/2}`.
    pub z_gap: f64,
    /// `sup_s |Z_s − θ⁽¹⁾(t_s, X_s)|`.
    pub z_sup_gap: f64,
}

pub fn uniqueness_probe(candidate: &FbsdePath, reference: &PideSolution) -> UniquenessReport {
    let grid = candidate.grid();
    let dt = grid.dt();
    let mut y_gap: f64 = 0.0;
    let mut z_sq = 0.0;
    let mut z_sup: f64 = 0.0;
    for s in 0..candidate.len() {
        let t = grid.time(s);
        let x = candidate.x(s);
        let theta = reference.theta_at(t, x);
        for (a, b) in candidate.y(s).iter().zip(&theta) {
            y_gap = y_gap.max((a - b).abs());
        }
    }
    let z_rows = candidate.z.len() / (candidate.q * candidate.m);
    for s in 0..z_rows {
        let t = grid.time(s);
        let z_ref = reference.theta1_at(t, candidate.x(s));
        let sq: f64 = candidate
            .z(s)
            .iter()
            .zip(&z_ref)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        z_sq += sq * dt;
        z_sup = z_sup.max(sq.sqrt());
    }
    UniquenessReport {
        y_gap,
        z_gap: z_sq.sqrt(),
        z_sup_gap: z_sup,
    }
}
