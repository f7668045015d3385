//! Numerical solution of forward-backward SDEs driven by a Lévy process.
//!
//! The pipeline:
//!
//! 1. [`levy_model`]: the driver, a Brownian coefficient `a` and a finite-activity Lévy measure ν.
//! 2. [`teugels`]: polynomials `q_{i−1}` orthonormal for `x² ν(dx) + a² δ₀(dx)` and the jump
//!    polynomials `p_i(x) = x q_{i−1}(x)`, truncated at chaos order `M`.
//! 3. [`path_sim`]: Monte Carlo paths of the orthogonalized martingales `H⁽ⁱ⁾`.
//! 4. [`pide_solver`]: the decoupling field θ of the FBSDE as the solution of a final-value
//!    partial integro-differential equation, by fixed-point iteration over backward IMEX sweeps.
//! 5. [`fbsde_solver`]: forward simulation of `X`, with `Y = θ(t, X)` and `Z = θ⁽¹⁾(t, X₋)`, and
//!    pathwise residuals of the backward equation.
//! 6. [`pricing`]: a large-investor market as an FBSDE, claim prices and replicating portfolios.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbsde_solver;
pub mod levy_model;
pub mod path_sim;
pub mod pide_solver;
pub mod poly;
pub mod pricing;
pub mod teugels;

pub use error::{FbsdeError, Result};
pub use fbsde_solver::{
    bsde_residual, jump_consistency, residual_report, simulate_forward, simulate_forward_on,
    simulate_forward_paths, uniqueness_probe, Escape, FbsdePath, ResidualReport,
    UniquenessReport,
};
pub use levy_model::{Atom, DensityKind, DensityMeasure, LevyMeasure, LevyModel};
pub use path_sim::{
    chaos_identity_check, jump_count_test, martingale_stats, sample_path, simulate_paths,
    ChaosIntegrand, ChaosReport, ChiSquareReport, Jump, MartingaleReport, RngSpec, SamplePath,
    TimeGrid, TruncationWarning,
};
pub use pide_solver::{
    assemble_coefficients, solve_pide, theta1_from_theta, CoefficientSet, DomainDiagnostics,
    FbsdeProblem, GridAxis, PideSolution, SolverConfig, SolverMode, SpatialGrid, SweepLog,
};
pub use poly::Polynomial;
pub use pricing::{
    build_market_problem, price, recover_portfolio, replication_check, HedgeReport, MarketModel,
    Payoff, PortfolioFit, PriceDynamics, PriceResult,
};
pub use teugels::{build_basis, check_orthogonality, OrthogonalityReport, TeugelsBasis};
