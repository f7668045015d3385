//! Large-investor pricing. Log-prices `Q` are the forward state and the wealth `W` is the
//! backward state; the portfolio enters the wealth driver only through `Z`.
//!
//! The self-financing wealth of a portfolio holding `α_j` units of asset `j` obeys
//! `dW = [Σ α_j P_j μ^j + (W − Σ α_j P_j) r] dt + Σ_j α_j P_j ς^j·dH`, where `μ^j` and `ς^j` are
//! the relative drift and the per-unit-price volatility rows of `P_j = e^{Q_j}`:
//! `μ^j = f^j + β^{jj} + ∫ (e^{δ^j} − 1 − δ^j) ν`, `ς_i^j = ∫ (e^{δ^j} − 1) p_i ν + c_i^j`.
//! Matching the `dH` part with `Z` gives the amounts `α_j P_j` by least squares.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{FbsdeError, Result};
use crate::fbsde_solver::simulate_forward_on;
use crate::levy_model::LevyModel;
use crate::path_sim::{sample_path, RngSpec, TimeGrid};
use crate::pide_solver::{
    assemble_coefficients, solve_pide, CoefficientSet, FbsdeProblem, PideSolution, SolverConfig,
    SpatialGrid,
};
use crate::teugels::TeugelsBasis;

/// `(t, w, z) ↦ r`.
pub type RateFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;
/// `(t, q, w, z) ↦ ℝ^d`.
pub type LogDriftFn = Arc<dyn Fn(f64, &[f64], f64, &[f64]) -> Vec<f64> + Send + Sync>;
/// `(t, q, w) ↦ ℝ^{d×M}` row-major.
pub type LogVolatilityFn = Arc<dyn Fn(f64, &[f64], f64) -> Vec<f64> + Send + Sync>;

/// Contingent claims on the terminal prices. For two assets the call, put and table payoffs
/// apply to the arithmetic mean price.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    Constant { value: f64 },
    /// Piecewise linear in price through `(price, payoff)` points sorted by price, constant
    /// beyond the ends.
    Table { points: Vec<(f64, f64)> },
}

impl Payoff {
    pub fn validate(&self) -> Result<()> {
        match self {
            Payoff::Call { strike } | Payoff::Put { strike } if !(*strike >= 0.0) => Err(
                FbsdeError::InvalidConfig(format!("payoff.strike = {strike} must be ≥ 0")),
            ),
            Payoff::Constant { value } if !value.is_finite() => Err(FbsdeError::InvalidConfig(
                format!("payoff.value = {value} must be finite"),
            )),
            Payoff::Table { points } => {
                if points.is_empty() {
                    return Err(FbsdeError::InvalidConfig("payoff.points is empty".into()));
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(FbsdeError::InvalidConfig(
                        "payoff.points must have strictly increasing prices".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, prices: &[f64]) -> f64 {
        let s = prices.iter().sum::<f64>() / prices.len() as f64;
        match self {
            Payoff::Call { strike } => (s - strike).max(0.0),
            Payoff::Put { strike } => (strike - s).max(0.0),
            Payoff::Constant { value } => *value,
            Payoff::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if s <= first.0 {
                    return first.1;
                }
                if s >= last.0 {
                    return last.1;
                }
                let k = points.partition_point(|p| p.0 <= s);
                let (a, b) = (points[k - 1], points[k]);
                a.1 + (s - a.0) / (b.0 - a.0) * (b.1 - a.1)
            }
        }
    }
}

/// The market: `d` risky assets with log-prices `dQ = f_log dt + σ_log dH`, a money market with
/// rate `r`, and a claim on the terminal prices.
#[derive(Clone)]
pub struct MarketModel {
    d: usize,
    m: usize,
    maturity: f64,
    s0: Vec<f64>,
    r: RateFn,
    f_log: LogDriftFn,
    sigma_log: LogVolatilityFn,
    payoff: Payoff,
}

impl fmt::Debug for MarketModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarketModel")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("maturity", &self.maturity)
            .field("s0", &self.s0)
            .field("payoff", &self.payoff)
            .finish_non_exhaustive()
    }
}

impl MarketModel {
    /// A market with zero rate, drift and volatility and a zero payoff.
    pub fn new(d: usize, m: usize, maturity: f64, s0: Vec<f64>) -> Result<Self> {
        if d == 0 || d > crate::pide_solver::MAX_DIM {
            return Err(FbsdeError::InvalidConfig(format!(
                "d = {d}: the grid solver supports 1 or 2 assets"
            )));
        }
        if m == 0 {
            return Err(FbsdeError::InvalidConfig("chaos order M must be ≥ 1".into()));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(FbsdeError::InvalidConfig(format!(
                "maturity {maturity} must be positive"
            )));
        }
        if s0.len() != d || s0.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(FbsdeError::InvalidConfig(format!(
                "S0 must hold {d} positive prices, got {s0:?}"
            )));
        }
        Ok(Self {
            d,
            m,
            maturity,
            s0,
            r: Arc::new(|_, _, _| 0.0),
            f_log: Arc::new(move |_, _, _, _| vec![0.0; d]),
            sigma_log: Arc::new(move |_, _, _| vec![0.0; d * m]),
            payoff: Payoff::Constant { value: 0.0 },
        })
    }

    pub fn with_rate<F>(mut self, r: F) -> Self
    where
        F: Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.r = Arc::new(r);
        self
    }

    pub fn with_constant_rate(self, r0: f64) -> Self {
        self.with_rate(move |_, _, _| r0)
    }

    pub fn with_log_drift<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.f_log = Arc::new(f);
        self
    }

    pub fn with_log_sigma<F>(mut self, sigma: F) -> Self
    where
        F: Fn(f64, &[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.sigma_log = Arc::new(sigma);
        self
    }

    pub fn with_payoff(mut self, payoff: Payoff) -> Self {
        self.payoff = payoff;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn s0(&self) -> &[f64] {
        &self.s0
    }

    /// `q₀ = log S0`.
    pub fn q0(&self) -> Vec<f64> {
        self.s0.iter().map(|s| s.ln()).collect()
    }

    pub fn payoff(&self) -> &Payoff {
        &self.payoff
    }

    pub fn rate(&self, t: f64, w: f64, z: &[f64]) -> f64 {
        (self.r)(t, w, z)
    }
}

/// Price-space dynamics derived from the log-space specification.
#[derive(Debug, Clone)]
pub struct PriceDynamics {
    coeffs: CoefficientSet,
}

impl PriceDynamics {
    pub fn new(market: &MarketModel, model: &LevyModel, basis: &TeugelsBasis) -> Result<Self> {
        let sigma_log = market.sigma_log.clone();
        let vol = FbsdeProblem::new(market.d, 1, market.m, market.maturity)?
            .with_sigma(move |t, q, w| sigma_log(t, q, w[0]));
        Ok(Self {
            coeffs: assemble_coefficients(&vol, basis, model)?,
        })
    }

    /// Per-unit-price volatility rows `ς^j_i`, row-major `d × M`.
    pub fn relative_rows(&self, t: f64, q: &[f64], w: f64) -> Vec<f64> {
        let sigma = self.coeffs.sigma(t, q, &[w]);
        self.rows_from_sigma(&sigma)
    }

    fn rows_from_sigma(&self, sigma: &[f64]) -> Vec<f64> {
        let m = self.coeffs.m();
        let mut rows = self.coeffs.c_from_sigma(sigma);
        for (w, node) in self.coeffs.jump_nodes().iter().enumerate() {
            let delta = self.coeffs.delta_at_node(sigma, w);
            let pw = self.coeffs.p_at_node(w);
            for (j, dj) in delta.iter().enumerate() {
                let jump = node.weight * dj.exp_m1();
                for i in 0..m {
                    rows[j * m + i] += jump * pw[i];
                }
            }
        }
        rows
    }

    /// Relative drifts `μ^j` given the log drift `f`.
    pub fn relative_drift(&self, t: f64, q: &[f64], w: f64, f_log: &[f64]) -> Vec<f64> {
        let sigma = self.coeffs.sigma(t, q, &[w]);
        self.drift_from_sigma(&sigma, f_log)
    }

    fn drift_from_sigma(&self, sigma: &[f64], f_log: &[f64]) -> Vec<f64> {
        let d = self.coeffs.p();
        let beta = self.coeffs.beta_from_sigma(sigma);
        let mut mu: Vec<f64> = (0..d).map(|j| f_log[j] + beta[j * d + j]).collect();
        for (w, node) in self.coeffs.jump_nodes().iter().enumerate() {
            for (j, dj) in self.coeffs.delta_at_node(sigma, w).iter().enumerate() {
                mu[j] += node.weight * (dj.exp_m1() - dj);
            }
        }
        mu
    }
}

/// Least-squares portfolio for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioFit {
    /// Units held of each asset.
    pub alpha: Vec<f64>,
    /// `‖Z − Σ_j α_j P_j ς^j‖`.
    pub residual: f64,
    /// Whether every `α_j ≥ 0`.
    pub nonnegative: bool,
}

/// Minimal-norm least-squares solution of `Z_i = Σ_j α_j P_j ς_i^j` over `i ≤ M`.
pub fn recover_portfolio(z: &[f64], sigma_rows: &[f64], prices: &[f64]) -> PortfolioFit {
    let d = prices.len();
    let m = z.len();
    if d == 1 {
        let col: Vec<f64> = sigma_rows[..m].iter().map(|s| prices[0] * s).collect();
        let norm2: f64 = col.iter().map(|c| c * c).sum();
        let alpha = if norm2 > 0.0 {
            col.iter().zip(z).map(|(c, v)| c * v).sum::<f64>() / norm2
        } else {
            0.0
        };
        let residual = col
            .iter()
            .zip(z)
            .map(|(c, v)| (v - alpha * c).powi(2))
            .sum::<f64>()
            .sqrt();
        return PortfolioFit {
            alpha: vec![alpha],
            residual,
            nonnegative: alpha >= 0.0,
        };
    }
    let a = DMatrix::from_fn(m, d, |i, j| prices[j] * sigma_rows[j * m + i]);
    let b = DVector::from_column_slice(z);
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (largest * 1e-12).max(f64::MIN_POSITIVE);
    let alpha = svd
        .solve(&b, eps)
        .map(|v| v.iter().copied().collect::<Vec<f64>>())
        .unwrap_or_else(|_| vec![0.0; d]);
    let fitted = &a * DVector::from_column_slice(&alpha);
    let residual = (b - fitted).norm();
    let nonnegative = alpha.iter().all(|a| *a >= 0.0);
    PortfolioFit {
        alpha,
        residual,
        nonnegative,
    }
}

fn rank(rows: &[f64], d: usize, m: usize) -> usize {
    let a = DMatrix::from_fn(d, m, |j, i| rows[j * m + i]);
    let sv = a.svd(false, false).singular_values;
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-10 * largest).count()
}

/// The market as an FBSDE in `(Q, W)`: `f = f_log`, `σ = σ_log`, `h = payoff ∘ exp`, and
/// driver `g = −[Σ_j π_j μ^j + (w − Σ_j π_j) r]` with the amounts `π` recovered from `z`.
pub fn build_market_problem(
    market: &MarketModel,
    model: &LevyModel,
    basis: &TeugelsBasis,
) -> Result<FbsdeProblem> {
    if basis.order() != market.m {
        return Err(FbsdeError::BasisMismatch {
            basis: basis.order(),
            problem: market.m,
        });
    }
    market.payoff.validate()?;
    let dynamics = Arc::new(PriceDynamics::new(market, model, basis)?);
    let (d, m) = (market.d, market.m);

    let q0 = market.q0();
    let probes = [
        q0.clone(),
        q0.iter().map(|q| q - 0.5).collect::<Vec<_>>(),
        q0.iter().map(|q| q + 0.5).collect::<Vec<_>>(),
    ];
    for q in &probes {
        let rows = dynamics.relative_rows(0.0, q, 0.0);
        let found = rank(&rows, d, m);
        if found < d {
            return Err(FbsdeError::RankDeficientVolatility {
                rank: found,
                required: d,
                probe: q.clone(),
            });
        }
    }

    let f_log = market.f_log.clone();
    let sigma_log = market.sigma_log.clone();
    let payoff = market.payoff.clone();
    let rate = market.r.clone();
    let f_for_g = market.f_log.clone();
    let driver_dynamics = dynamics.clone();
    let problem = FbsdeProblem::new(d, 1, m, market.maturity)?
        .with_drift(move |t, q, y, z| f_log(t, q, y[0], z))
        .with_sigma(move |t, q, y| sigma_log(t, q, y[0]))
        .with_terminal(move |q| {
            let prices: Vec<f64> = q.iter().map(|v| v.exp()).collect();
            vec![payoff.eval(&prices)]
        })
        .with_driver(move |t, q, y, z| {
            let w = y[0];
            let sigma = driver_dynamics.coeffs.sigma(t, q, y);
            let rows = driver_dynamics.rows_from_sigma(&sigma);
            let mu = driver_dynamics.drift_from_sigma(&sigma, &f_for_g(t, q, w, z));
            // Unit prices: the fit returns amounts π_j = α_j P_j.
            let amounts = recover_portfolio(z, &rows, &vec![1.0; mu.len()]).alpha;
            let r = rate(t, w, z);
            let invested: f64 = amounts.iter().sum();
            let growth: f64 = amounts.iter().zip(&mu).map(|(a, u)| a * u).sum();
            vec![-(growth + (w - invested) * r)]
        })
        .with_z_dependence(true);
    Ok(problem)
}

#[derive(Debug, Clone)]
pub struct PriceResult {
    /// `θ(0, q₀)`.
    pub w0: f64,
    pub solution: PideSolution,
}

impl PriceResult {
    /// `(q, θ(0, q))` at every grid node.
    pub fn surface(&self) -> Vec<(Vec<f64>, f64)> {
        let spatial = self.solution.spatial();
        (0..spatial.n_nodes())
            .map(|n| (spatial.coords(n), self.solution.theta(0)[n]))
            .collect()
    }
}

pub fn price(
    market: &MarketModel,
    model: &LevyModel,
    basis: &TeugelsBasis,
    spatial: &SpatialGrid,
    config: &SolverConfig,
) -> Result<PriceResult> {
    let problem = build_market_problem(market, model, basis)?;
    let q0 = market.q0();
    if !spatial.contains(&q0) {
        return Err(FbsdeError::InvalidConfig(format!(
            "grid does not contain log S0 = {q0:?}"
        )));
    }
    let solution = solve_pide(&problem, model, basis, spatial, config)?;
    let w0 = solution.theta_at(0.0, &q0)[0];
    Ok(PriceResult { w0, solution })
}

/// Self-financing replication along simulated price paths.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    pub n_steps: usize,
    pub d: usize,
    /// Units held, per path, `n_steps × d` row-major; empty for escaped paths.
    pub alpha: Vec<Vec<f64>>,
    /// Least-squares defect of the portfolio fit, per path and step.
    pub fit_residual: Vec<Vec<f64>>,
    /// `W̃(T) − payoff(P(T))` per path; `None` for paths that left the grid.
    pub terminal_error: Vec<Option<f64>>,
    /// Number of (path, step) pairs with some `α_j < 0`.
    pub negative_alpha_steps: usize,
}

impl HedgeReport {
    fn kept(&self) -> Vec<f64> {
        self.terminal_error.iter().flatten().copied().collect()
    }

    pub fn n_escaped(&self) -> usize {
        self.terminal_error.iter().filter(|e| e.is_none()).count()
    }

    pub fn escape_rate(&self) -> f64 {
        self.n_escaped() as f64 / self.terminal_error.len().max(1) as f64
    }

    pub fn mean_error(&self) -> f64 {
        let kept = self.kept();
        kept.iter().sum::<f64>() / kept.len().max(1) as f64
    }

    pub fn se_error(&self) -> f64 {
        let kept = self.kept();
        let n = kept.len();
        if n < 2 {
            return 0.0;
        }
        let mean = kept.iter().sum::<f64>() / n as f64;
        let var = kept.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    pub fn rms_error(&self) -> f64 {
        let kept = self.kept();
        (kept.iter().map(|e| e * e).sum::<f64>() / kept.len().max(1) as f64).sqrt()
    }

    pub fn max_fit_residual(&self) -> f64 {
        self.fit_residual
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Simulates `n_paths` price paths on `grid`, recovers the portfolio from `Z` at each step and
/// rolls the self-financing wealth forward from `W̃(0) = θ(0, q₀)` with the realized price
/// increments.
pub fn replication_check(
    market: &MarketModel,
    model: &LevyModel,
    basis: &TeugelsBasis,
    solution: &PideSolution,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
) -> Result<HedgeReport> {
    let problem = build_market_problem(market, model, basis)?;
    let coeffs = assemble_coefficients(&problem, basis, model)?;
    let dynamics = PriceDynamics::new(market, model, basis)?;
    let q0 = market.q0();
    let d = market.d;
    let n = grid.n_steps();
    let dt = grid.dt();

    type PathOut = (Vec<f64>, Vec<f64>, Option<f64>, usize);
    let per_path: Vec<Result<PathOut>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| {
            let base = sample_path(model, basis, grid, RngSpec::new(seed, stream));
            let path = simulate_forward_on(solution, &coeffs, &q0, base)?;
            if !path.is_complete() {
                return Ok((Vec::new(), Vec::new(), None, 0));
            }
            let mut alpha = Vec::with_capacity(n * d);
            let mut fit = Vec::with_capacity(n);
            let mut negative = 0;
            let mut wealth = path.y(0)[0];
            for s in 0..n {
                let t = grid.time(s);
                let q = path.x(s);
                let prices: Vec<f64> = q.iter().map(|v| v.exp()).collect();
                let next: Vec<f64> = path.x(s + 1).iter().map(|v| v.exp()).collect();
                let rows = dynamics.relative_rows(t, q, path.y(s)[0]);
                let z = path.z(s);
                let portfolio = recover_portfolio(z, &rows, &prices);
                if !portfolio.nonnegative {
                    negative += 1;
                }
                let r = market.rate(t, wealth, z);
                let mut invested = 0.0;
                let mut gain = 0.0;
                for j in 0..d {
                    invested += portfolio.alpha[j] * prices[j];
                    gain += portfolio.alpha[j] * (next[j] - prices[j]);
                }
                wealth += gain + (wealth - invested) * r * dt;
                alpha.extend_from_slice(&portfolio.alpha);
                fit.push(portfolio.residual);
            }
            let terminal: Vec<f64> = path.x(n).iter().map(|v| v.exp()).collect();
            let error = wealth - market.payoff.eval(&terminal);
            Ok((alpha, fit, Some(error), negative))
        })
        .collect();

    let mut report = HedgeReport {
        n_steps: n,
        d,
        alpha: Vec::with_capacity(n_paths),
        fit_residual: Vec::with_capacity(n_paths),
        terminal_error: Vec::with_capacity(n_paths),
        negative_alpha_steps: 0,
    };
    for item in per_path {
        let (alpha, fit, error, negative) = item?;
        report.alpha.push(alpha);
        report.fit_residual.push(fit);
        report.terminal_error.push(error);
        report.negative_alpha_steps += negative;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_scalar_fit() {
        let fit = recover_portfolio(&[0.6], &[0.2], &[1.0]);
        assert!((fit.alpha[0] - 3.0).abs() < 1e-14);
        assert!(fit.residual < 1e-15);
        assert!(fit.nonnegative);
    }

    #[test]
    fn consistent_overdetermined_fit() {
        let rows = [0.3, -0.4];
        let z = [-1.5 * 0.3 * 2.0, -1.5 * -0.4 * 2.0];
        let fit = recover_portfolio(&z, &rows, &[2.0]);
        assert!((fit.alpha[0] + 1.5).abs() < 1e-13);
        assert!(fit.residual < 1e-14);
        assert!(!fit.nonnegative);
    }

    #[test]
    fn inconsistent_fit_matches_normal_equations() {
        // Z = α(σ₁, σ₂) + (0, ε): α̂ = α + ε σ₂/‖σ‖², residual = ε |σ₁| / ‖σ‖.
        let (s1, s2, alpha, eps) = (0.5, 0.25, 2.0, 1e-3);
        let z = [alpha * s1, alpha * s2 + eps];
        let fit = recover_portfolio(&z, &[s1, s2], &[1.0]);
        let norm2 = s1 * s1 + s2 * s2;
        assert!((fit.alpha[0] - (alpha + eps * s2 / norm2)).abs() < 1e-14);
        assert!((fit.residual - eps * s1.abs() / norm2.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn minimal_norm_when_underdetermined() {
        // Two assets with identical rows: amounts split evenly.
        let fit = recover_portfolio(&[1.0], &[0.5, 0.5], &[1.0, 1.0]);
        assert!((fit.alpha[0] - 1.0).abs() < 1e-12 && (fit.alpha[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn payoff_shapes() {
        assert_eq!(Payoff::Call { strike: 100.0 }.eval(&[110.0]), 10.0);
        assert_eq!(Payoff::Put { strike: 100.0 }.eval(&[110.0]), 0.0);
        assert_eq!(Payoff::Call { strike: 100.0 }.eval(&[90.0, 130.0]), 10.0);
        let table = Payoff::Table {
            points: vec![(50.0, 0.0), (100.0, 10.0), (150.0, 0.0)],
        };
        assert_eq!(table.eval(&[75.0]), 5.0);
        assert_eq!(table.eval(&[10.0]), 0.0);
        assert_eq!(table.eval(&[125.0]), 5.0);
        assert!(Payoff::Table { points: vec![] }.validate().is_err());
    }

    #[test]
    fn flat_volatility_is_rank_deficient() {
        let model = LevyModel::brownian(1.0).unwrap();
        let basis = crate::teugels::build_basis(&model, 1).unwrap();
        let market = MarketModel::new(1, 1, 1.0, vec![100.0]).unwrap();
        let err = build_market_problem(&market, &model, &basis).unwrap_err();
        assert!(matches!(
            err,
            FbsdeError::RankDeficientVolatility {
                rank: 0,
                required: 1,
                ..
            }
        ));
    }
}
