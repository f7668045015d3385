//! Closed forms and series used as references by the checks. None of these touch the solver.

use statrs::distribution::{ContinuousCDF, Normal};

/// `exp(−x²/2)`, the terminal value of the bump problems.
pub fn bump(x: f64) -> f64 {
    (-0.5 * x * x).exp()
}

/// `E[bump(x + s W_τ)]`: the bump after heat flow with diffusivity `s²/2` for time `tau`.
pub fn heat_bump(s: f64, tau: f64, x: f64) -> f64 {
    let var = 1.0 + s * s * tau;
    (-0.5 * x * x / var).exp() / var.sqrt()
}

/// Poisson(`mean`) weights, truncated once the tail is negligible.
fn poisson_weights(mean: f64) -> Vec<f64> {
    let mut weights = Vec::new();
    let mut w = (-mean).exp();
    for n in 0..1000 {
        if n > 0 {
            w *= mean / n as f64;
        }
        weights.push(w);
        if n as f64 > mean && w < 1e-18 {
            break;
        }
    }
    weights
}

/// `E[bump(x + κ(N − λτ))]` with `N ~ Poisson(λτ)`: the compensated Poisson flow.
pub fn poisson_bump(lambda: f64, kappa: f64, tau: f64, x: f64) -> f64 {
    poisson_weights(lambda * tau)
        .iter()
        .enumerate()
        .map(|(n, w)| w * bump(x + kappa * (n as f64 - lambda * tau)))
        .sum()
}

pub fn black_scholes_call(s0: f64, strike: f64, r: f64, vol: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let sd = vol * t.sqrt();
    let d1 = ((s0 / strike).ln() + (r + 0.5 * vol * vol) * t) / sd;
    let d2 = d1 - sd;
    s0 * n.cdf(d1) - strike * (-r * t).exp() * n.cdf(d2)
}

/// `e^{−rT} E[(S_T − K)^+]` for `S_T = S0 exp(b T + κ N)`, `N ~ Poisson(λ* T)`.
pub fn jump_call(s0: f64, strike: f64, r: f64, b: f64, kappa: f64, intensity: f64, t: f64) -> f64 {
    let expectation: f64 = poisson_weights(intensity * t)
        .iter()
        .enumerate()
        .map(|(n, w)| w * (s0 * (b * t + kappa * n as f64).exp() - strike).max(0.0))
        .sum();
    (-r * t).exp() * expectation
}

/// Risk-neutral jump intensity for a single-jump market `dQ = b dt + κ dN`: the `λ*` with
/// `b + λ*(e^κ − 1) = r`.
pub fn risk_neutral_intensity(r: f64, b: f64, kappa: f64) -> f64 {
    (r - b) / kappa.exp_m1()
}
