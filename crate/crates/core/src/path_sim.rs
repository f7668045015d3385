//! Monte Carlo paths of the Lévy driver and of the orthogonalized martingales `H⁽ⁱ⁾`.
//!
//! Per step, `dH⁽ⁱ⁾ = q_{i−1}(0) dB + Σ_{jumps} p_i(ΔL) − Δt ∫ p_i dν`, where `B` is a single
//! Brownian motion with variance `a² t`. Jumps are drawn in continuous time on their own random
//! substream (arrival count, then uniform arrival times and i.i.d. sizes), so refining the time grid
//! keeps the same jumps; each jump is attached to the step `(t_s, t_{s+1}]` containing it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson as PoissonPmf};

use crate::error::{FbsdeError, Result};
use crate::levy_model::LevyModel;
use crate::teugels::TeugelsBasis;

/// Uniform time grid `t_s = s T / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n_steps == 0 {
            return Err(FbsdeError::InvalidConfig(format!(
                "time grid needs T > 0 and n_steps ≥ 1 (got T = {horizon}, n_steps = {n_steps})"
            )));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, s: usize) -> f64 {
        if s == self.n_steps {
            self.horizon
        } else {
            s as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|s| self.time(s)).collect()
    }

    /// Index of the step `(t_s, t_{s+1}]` containing `t ∈ (0, T]`.
    pub fn step_of(&self, t: f64) -> usize {
        let s = (t / self.dt()).ceil() as usize;
        s.clamp(1, self.n_steps) - 1
    }
}

/// Seed plus per-path stream id; `(seed, stream)` identifies an independent substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    fn substream(&self, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream.wrapping_mul(4).wrapping_add(lane));
        rng
    }

    pub(crate) fn brownian(&self) -> ChaCha8Rng {
        self.substream(0)
    }

    pub(crate) fn jumps(&self) -> ChaCha8Rng {
        self.substream(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Arrival time in `(0, T]`.
    pub time: f64,
    pub size: f64,
}

/// One simulated path of the driver and of the increments of `H⁽¹⁾ … H⁽ᴹ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    order: usize,
    db: Vec<f64>,
    jumps: Vec<Vec<Jump>>,
    dh: Vec<f64>,
}

impl SamplePath {
    /// Assembles a path from Brownian increments and per-step jump lists.
    ///
    /// # Panics
    /// If `db` or `jumps` does not have one entry per step.
    pub fn from_increments(
        basis: &TeugelsBasis,
        grid: &TimeGrid,
        db: Vec<f64>,
        jumps: Vec<Vec<Jump>>,
    ) -> Self {
        let n = grid.n_steps();
        let m = basis.order();
        assert_eq!(db.len(), n, "one Brownian increment per step");
        assert_eq!(jumps.len(), n, "one jump list per step");
        let dt = grid.dt();
        let mut dh = vec![0.0; n * m];
        for s in 0..n {
            for i in 0..m {
                let jump_sum: f64 = jumps[s].iter().map(|j| basis.p()[i].eval(j.size)).sum();
                dh[s * m + i] = basis.q0()[i] * db[s] + jump_sum - dt * basis.p_means()[i];
            }
        }
        Self {
            grid: *grid,
            order: m,
            db,
            jumps,
            dh,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Increments of the Brownian part `B^λ`.
    pub fn db(&self) -> &[f64] {
        &self.db
    }

    /// Jumps arriving in `(t_s, t_{s+1}]`.
    pub fn jumps(&self, step: usize) -> &[Jump] {
        &self.jumps[step]
    }

    pub fn all_jumps(&self) -> impl Iterator<Item = &Jump> {
        self.jumps.iter().flatten()
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.iter().map(Vec::len).sum()
    }

    /// `dH⁽¹⁾ … dH⁽ᴹ⁾` over step `s`.
    pub fn dh(&self, step: usize) -> &[f64] {
        &self.dh[step * self.order..(step + 1) * self.order]
    }

    /// `H_T⁽ⁱ⁾` for every `i`.
    pub fn terminal_h(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.order];
        for s in 0..self.grid.n_steps() {
            for (acc, v) in total.iter_mut().zip(self.dh(s)) {
                *acc += v;
            }
        }
        total
    }
}

/// Simulates one path. Deterministic for a fixed `rng`.
pub fn sample_path(
    model: &LevyModel,
    basis: &TeugelsBasis,
    grid: &TimeGrid,
    rng: RngSpec,
) -> SamplePath {
    let n = grid.n_steps();
    let dt = grid.dt();

    let db = if model.a() > 0.0 {
        let normal = Normal::new(0.0, model.a() * dt.sqrt()).expect("finite Brownian scale");
        let mut brng = rng.brownian();
        (0..n).map(|_| normal.sample(&mut brng)).collect()
    } else {
        vec![0.0; n]
    };

    let mut jumps = vec![Vec::new(); n];
    let intensity = model.jump_intensity();
    if intensity > 0.0 {
        let mut jrng = rng.jumps();
        let count = Poisson::new(intensity * grid.horizon())
            .expect("positive Poisson mean")
            .sample(&mut jrng) as usize;
        let mut arrivals: Vec<Jump> = (0..count)
            .map(|_| {
                // (0, T]: 1 − U ∈ (0, 1]
                let time = (1.0 - jrng.gen::<f64>()) * grid.horizon();
                let size = model.sample_jump_size(&mut jrng);
                Jump { time, size }
            })
            .collect();
        arrivals.sort_by(|a, b| a.time.total_cmp(&b.time));
        for jump in arrivals {
            jumps[grid.step_of(jump.time)].push(jump);
        }
    }

    SamplePath::from_increments(basis, grid, db, jumps)
}

/// Simulates `n_paths` paths with streams `0..n_paths` of `seed`, in parallel. The output order
/// is the stream order, independent of the thread count.
pub fn simulate_paths(
    model: &LevyModel,
    basis: &TeugelsBasis,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
) -> Vec<SamplePath> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| sample_path(model, basis, grid, RngSpec::new(seed, stream)))
        .collect()
}

/// Flag threshold for z-scores in the statistical reports.
pub const Z_FLAG: f64 = 4.0;

/// Empirical moments of `H_T` across paths.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub n_paths: usize,
    pub horizon: f64,
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// Empirical `cov(H_T⁽ⁱ⁾, H_T⁽ʲ⁾)`.
    pub cov: Vec<Vec<f64>>,
    pub cov_se: Vec<Vec<f64>>,
    /// `(cov − T δ_ij) / SE`.
    pub cov_z: Vec<Vec<f64>>,
}

impl MartingaleReport {
    pub fn mean_z(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.mean_se)
            .map(|(m, se)| if *se > 0.0 { m / se } else if *m == 0.0 { 0.0 } else { f64::INFINITY })
            .collect()
    }

    /// True when some `|z| > 4`.
    pub fn flagged(&self) -> bool {
        self.mean_z().iter().any(|z| z.abs() > Z_FLAG)
            || self.cov_z.iter().flatten().any(|z| z.abs() > Z_FLAG)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Means and covariances of `H_T` against the martingale/isometry targets `0` and `T δ_ij`.
pub fn martingale_stats(paths: &[SamplePath]) -> Result<MartingaleReport> {
    if paths.len() < 2 {
        return Err(FbsdeError::InvalidConfig(
            "martingale statistics need at least two paths".into(),
        ));
    }
    let m = paths[0].order();
    let horizon = paths[0].grid().horizon();
    let terminal: Vec<Vec<f64>> = paths.iter().map(SamplePath::terminal_h).collect();

    let mut mean = vec![0.0; m];
    let mut mean_se = vec![0.0; m];
    for i in 0..m {
        let column: Vec<f64> = terminal.iter().map(|h| h[i]).collect();
        (mean[i], mean_se[i]) = mean_and_se(&column);
    }

    let mut cov = vec![vec![0.0; m]; m];
    let mut cov_se = vec![vec![0.0; m]; m];
    let mut cov_z = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let products: Vec<f64> = terminal
                .iter()
                .map(|h| (h[i] - mean[i]) * (h[j] - mean[j]))
                .collect();
            let (c, se) = mean_and_se(&products);
            let target = if i == j { horizon } else { 0.0 };
            cov[i][j] = c;
            cov_se[i][j] = se;
            cov_z[i][j] = z_score(c - target, se);
        }
    }

    Ok(MartingaleReport {
        n_paths: paths.len(),
        horizon,
        mean,
        mean_se,
        cov,
        cov_se,
        cov_z,
    })
}

/// Chi-square goodness of fit of jump counts on `[0, T]` against Poisson(ν(ℝ) T).
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareReport {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

pub fn jump_count_test(paths: &[SamplePath], intensity: f64) -> Result<ChiSquareReport> {
    if paths.is_empty() {
        return Err(FbsdeError::InvalidConfig("jump-count test needs paths".into()));
    }
    let n = paths.len() as f64;
    let mean = intensity * paths[0].grid().horizon();
    let counts: Vec<usize> = paths.iter().map(SamplePath::jump_count).collect();
    if mean == 0.0 {
        let any = counts.iter().any(|&c| c > 0);
        return Ok(ChiSquareReport {
            statistic: if any { f64::INFINITY } else { 0.0 },
            dof: 0,
            p_value: if any { 0.0 } else { 1.0 },
        });
    }
    let pmf = PoissonPmf::new(mean).map_err(|e| FbsdeError::InvalidConfig(e.to_string()))?;

    // Bins [lo, hi) with expected count ≥ 5; the last bin absorbs the upper tail.
    let max_count = counts.iter().copied().max().unwrap_or(0);
    let mut bins: Vec<(usize, f64)> = Vec::new();
    let mut lo = 0;
    let mut expected = 0.0;
    let mut k = 0;
    let mut cumulative = 0.0;
    while k <= max_count.max(mean as usize * 2 + 10) {
        let p = pmf.pmf(k as u64);
        expected += n * p;
        cumulative += p;
        k += 1;
        if expected >= 5.0 && n * (1.0 - cumulative) >= 5.0 {
            bins.push((lo, expected));
            lo = k;
            expected = 0.0;
        }
    }
    // upper tail from `lo`
    let tail = n * (1.0 - bins.iter().map(|b| b.1).sum::<f64>() / n);
    bins.push((lo, tail));

    let mut observed = vec![0.0; bins.len()];
    for &c in &counts {
        let idx = bins.partition_point(|b| b.0 <= c) - 1;
        observed[idx] += 1.0;
    }
    let statistic: f64 = observed
        .iter()
        .zip(&bins)
        .map(|(o, (_, e))| (o - e).powi(2) / e)
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64).map_err(|e| FbsdeError::InvalidConfig(e.to_string()))?;
        1.0 - chi.cdf(statistic)
    };
    Ok(ChiSquareReport {
        statistic,
        dof,
        p_value,
    })
}

/// A deterministic integrand `h(s, y)` for the jump-sum representation.
pub struct ChaosIntegrand {
    f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    y_degree: Option<usize>,
}

impl ChaosIntegrand {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            y_degree: None,
        }
    }

    /// Declares `h(s, ·)` a polynomial of the given degree.
    pub fn polynomial(degree: usize, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            y_degree: Some(degree),
        }
    }

    pub fn eval(&self, s: f64, y: f64) -> f64 {
        (self.f)(s, y)
    }
}

/// Raised when the integrand is not representable in the truncated chaos.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationWarning {
    pub declared_degree: Option<usize>,
    pub order: usize,
    /// Relative `L²(μ)` distance of `h(s, ·)` from its projection, maximized over probe times.
    pub span_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosReport {
    /// Jump sum minus (stochastic integral plus compensator), per path.
    pub residuals: Vec<f64>,
    pub max_abs: f64,
    pub rms: f64,
    pub warning: Option<TruncationWarning>,
}

fn projection_coefficients(
    model: &LevyModel,
    basis: &TeugelsBasis,
    integrand: &ChaosIntegrand,
    s: f64,
) -> Vec<f64> {
    basis
        .p()
        .iter()
        .map(|pi| model.nu_integral(|y| integrand.eval(s, y) * pi.eval(y)))
        .collect()
}

fn span_defect(model: &LevyModel, basis: &TeugelsBasis, integrand: &ChaosIntegrand, s: f64) -> f64 {
    let phi = projection_coefficients(model, basis, integrand, s);
    let jump_part = model.nu_integral(|y| {
        let proj: f64 = phi.iter().zip(basis.p()).map(|(c, pi)| c * pi.eval(y)).sum();
        (integrand.eval(s, y) - proj).powi(2)
    });
    let brownian: f64 = phi.iter().zip(basis.q0()).map(|(c, q)| c * q).sum();
    let norm = model.nu_integral(|y| integrand.eval(s, y).powi(2));
    let defect = (jump_part + (model.a() * brownian).powi(2)).sqrt();
    if norm > 0.0 {
        defect / norm.sqrt()
    } else {
        defect
    }
}

/// Relative span defect above which a [`TruncationWarning`] is raised.
pub const SPAN_DEFECT_TOL: f64 = 1e-8;

/// Compares, per path, `Σ_{0<s≤T} h(s, ΔL_s)` with
/// `Σ_s Σ_i φ_i(t_s) dH⁽ⁱ⁾_s + Σ_s Δt ∫ h(t_s, y) ν(dy)` where `φ_i(s) = ∫ h(s, y) p_i(y) ν(dy)`.
pub fn chaos_identity_check(
    model: &LevyModel,
    basis: &TeugelsBasis,
    integrand: &ChaosIntegrand,
    paths: &[SamplePath],
) -> ChaosReport {
    let Some(first) = paths.first() else {
        return ChaosReport {
            residuals: Vec::new(),
            max_abs: 0.0,
            rms: 0.0,
            warning: None,
        };
    };
    let grid = *first.grid();
    let dt = grid.dt();
    let steps: Vec<(Vec<f64>, f64)> = (0..grid.n_steps())
        .map(|s| {
            let t = grid.time(s);
            (
                projection_coefficients(model, basis, integrand, t),
                dt * model.nu_integral(|y| integrand.eval(t, y)),
            )
        })
        .collect();

    let residuals: Vec<f64> = paths
        .par_iter()
        .map(|path| {
            let lhs: f64 = path.all_jumps().map(|j| integrand.eval(j.time, j.size)).sum();
            let rhs: f64 = steps
                .iter()
                .enumerate()
                .map(|(s, (phi, compensator))| {
                    phi.iter().zip(path.dh(s)).map(|(c, d)| c * d).sum::<f64>() + compensator
                })
                .sum();
            lhs - rhs
        })
        .collect();

    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();

    let defect = [0.0, grid.horizon()]
        .iter()
        .map(|&s| span_defect(model, basis, integrand, s))
        .fold(0.0f64, f64::max);
    let degree_exceeds = integrand.y_degree.is_some_and(|d| d > basis.order());
    let warning = (degree_exceeds || defect > SPAN_DEFECT_TOL).then(|| TruncationWarning {
        declared_degree: integrand.y_degree,
        order: basis.order(),
        span_defect: defect,
    });

    ChaosReport {
        residuals,
        max_abs,
        rms,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::LevyMeasure;
    use crate::teugels::build_basis;

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.step_of(0.25), 0);
        assert_eq!(g.step_of(0.2500001), 1);
        assert_eq!(g.step_of(1.0), 3);
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn pure_brownian_increments() {
        let model = LevyModel::brownian(1.0).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let path = sample_path(&model, &basis, &grid, RngSpec::new(3, 0));
        assert_eq!(path.jump_count(), 0);
        for s in 0..50 {
            assert_eq!(path.dh(s)[0], path.db()[s]);
        }
    }

    #[test]
    fn compensated_poisson_increments() {
        let lambda = 2.5;
        let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, lambda)])).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let grid = TimeGrid::new(2.0, 40).unwrap();
        let path = sample_path(&model, &basis, &grid, RngSpec::new(11, 5));
        let p1 = basis.p()[0].eval(1.0);
        for s in 0..40 {
            assert_eq!(path.db()[s], 0.0);
            let k = path.jumps(s).len() as f64;
            let expected = k * p1 - grid.dt() * lambda * p1;
            assert!((path.dh(s)[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn deterministic_given_rng_spec() {
        let model = LevyModel::new(0.4, LevyMeasure::atomic([(0.5, 1.0), (-1.0, 2.0)])).unwrap();
        let basis = build_basis(&model, 3).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let a = sample_path(&model, &basis, &grid, RngSpec::new(9, 2));
        let b = sample_path(&model, &basis, &grid, RngSpec::new(9, 2));
        let c = sample_path(&model, &basis, &grid, RngSpec::new(9, 3));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn refinement_keeps_jumps() {
        let model = LevyModel::new(0.4, LevyMeasure::atomic([(0.5, 3.0)])).unwrap();
        let basis = build_basis(&model, 2).unwrap();
        let coarse = sample_path(&model, &basis, &TimeGrid::new(1.0, 10).unwrap(), RngSpec::new(1, 1));
        let fine = sample_path(&model, &basis, &TimeGrid::new(1.0, 40).unwrap(), RngSpec::new(1, 1));
        let a: Vec<_> = coarse.all_jumps().copied().collect();
        let b: Vec<_> = fine.all_jumps().copied().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn chaos_identity_trivial_integrand() {
        let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 2.0)])).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let paths = simulate_paths(&model, &basis, &grid, 4, 20);
        let report = chaos_identity_check(&model, &basis, &ChaosIntegrand::new(|_, _| 0.0), &paths);
        assert_eq!(report.max_abs, 0.0);
        assert!(report.warning.is_none());
    }

    #[test]
    fn chaos_identity_two_step_by_hand() {
        // a = 0, ν = 2 δ_1, M = 1: p_1(y) = y / √2, φ_1 = ∫ p_1² dν = 1, and the compensator
        // cancels exactly, so the residual is zero for time-independent h = p_1.
        let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 2.0)])).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let paths = simulate_paths(&model, &basis, &grid, 8, 50);
        let p1 = basis.p()[0].clone();
        let report = chaos_identity_check(
            &model,
            &basis,
            &ChaosIntegrand::polynomial(1, move |_, y| p1.eval(y)),
            &paths,
        );
        assert!(report.max_abs < 1e-12, "{}", report.max_abs);
        assert!(report.warning.is_none());
    }

    #[test]
    fn cubic_outside_span_is_flagged() {
        let model = LevyModel::new(1.0, LevyMeasure::atomic([(1.0, 1.0)])).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let paths = simulate_paths(&model, &basis, &grid, 2, 50);
        let report = chaos_identity_check(
            &model,
            &basis,
            &ChaosIntegrand::polynomial(3, |_, y| y.powi(3)),
            &paths,
        );
        let warning = report.warning.expect("truncation warning");
        assert!(warning.span_defect > 0.1);
        assert!(report.max_abs > 1e-3);
    }

    #[test]
    fn chi_square_accepts_poisson_counts() {
        let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 3.0)])).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let paths = simulate_paths(&model, &basis, &grid, 21, 2000);
        let report = jump_count_test(&paths, 3.0).unwrap();
        assert!(report.dof >= 4);
        assert!(report.passes(0.01), "{report:?}");
        // a wrong rate is rejected
        assert!(!jump_count_test(&paths, 4.0).unwrap().passes(0.01));
    }
}
