use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbsdeError {
    #[error("invalid Lévy model: {0}")]
    InvalidModel(String),

    #[error("degenerate measure: requested order {requested}, largest feasible order is {max_feasible} ({reason})")]
    DegenerateMeasure {
        requested: usize,
        max_feasible: usize,
        reason: String,
    },

    #[error("basis order {basis} does not match problem order {problem}")]
    BasisMismatch { basis: usize, problem: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("fixed-point iteration did not converge on [{t_start}, {t_end}]: {reason}")]
    NoConvergence {
        t_start: f64,
        t_end: f64,
        reason: String,
    },

    #[error("grid too small: jump displacement {displacement} exceeds half the extent {half_extent} along axis {axis}")]
    GridTooSmall {
        axis: usize,
        displacement: f64,
        half_extent: f64,
    },

    #[error("forward path left the solution domain at t = {time} (step {step})")]
    DomainEscape { time: f64, step: usize },

    #[error("volatility rows have rank {rank} < {required} at probe point {probe:?}")]
    RankDeficientVolatility {
        rank: usize,
        required: usize,
        probe: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, FbsdeError>;
