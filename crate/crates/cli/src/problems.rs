//! Problem presets that can be described in a config file.

use levy_fbsde::FbsdeProblem;

use crate::config::{ConfigError, ProblemSpec};
use crate::oracles::bump;

fn padded(sigma: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    out[..sigma.len()].copy_from_slice(sigma);
    out
}

pub fn horizon(spec: &ProblemSpec) -> f64 {
    match spec {
        ProblemSpec::Bump { horizon, .. }
        | ProblemSpec::Constant { horizon, .. }
        | ProblemSpec::Coupled { horizon } => *horizon,
    }
}

/// Bump problem with constant loadings.
pub fn bump_problem(m: usize, horizon: f64, drift: f64, sigma: &[f64]) -> FbsdeProblem {
    let sigma = padded(sigma, m);
    FbsdeProblem::new(1, 1, m, horizon)
        .expect("valid dimensions")
        .with_drift(move |_, _, _, _| vec![drift])
        .with_sigma(move |_, _, _| sigma.clone())
        .with_terminal(|x| vec![bump(x[0])])
}

/// Two-component chaos problem whose loadings depend on `y`, so the fixed point is non-trivial.
pub fn coupled_problem(horizon: f64) -> FbsdeProblem {
    FbsdeProblem::new(1, 1, 2, horizon)
        .expect("valid dimensions")
        .with_sigma(|_, _, y| vec![0.4 + 0.3 * y[0].sin(), 0.2 * y[0].cos()])
        .with_driver(|_, _, y, _| vec![4.0 * y[0].sin()])
        .with_terminal(|x| vec![bump(x[0])])
}

pub fn build(spec: &ProblemSpec, m: usize) -> Result<FbsdeProblem, ConfigError> {
    Ok(match spec {
        ProblemSpec::Bump {
            horizon,
            drift,
            sigma,
        } => bump_problem(m, *horizon, *drift, sigma),
        ProblemSpec::Constant {
            horizon,
            value,
            drift,
            sigma,
        } => {
            let (value, drift, sigma) = (*value, *drift, padded(sigma, m));
            FbsdeProblem::new(1, 1, m, *horizon)
                .map_err(|e| ConfigError::new("problem", e))?
                .with_drift(move |_, _, _, _| vec![drift])
                .with_sigma(move |_, _, _| sigma.clone())
                .with_terminal(move |_| vec![value])
        }
        ProblemSpec::Coupled { horizon } => {
            if m != 2 {
                return Err(ConfigError::new("order", "the coupled problem needs order 2"));
            }
            coupled_problem(*horizon)
        }
    })
}
