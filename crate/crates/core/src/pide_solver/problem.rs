use std::fmt;
use std::sync::Arc;

use crate::error::{FbsdeError, Result};

/// `(t, x, y, z) ↦ ℝ^n`, with `z` stored row-major as `Q × M`.
pub type DriverFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// `(t, x, y) ↦ ℝ^{P×M}`, row-major: entry `k·M + i` is `σ_i^k`.
pub type VolatilityFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// `x ↦ ℝ^Q`.
pub type TerminalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Largest supported forward or backward dimension.
pub const MAX_DIM: usize = 2;

/// A coupled FBSDE on `[0, T]`:
///
/// `dX = f(t, X, Y, Z) dt + Σ_i σ_i(t, X₋, Y₋) dH⁽ⁱ⁾`, `Y_t = h(X_T) + ∫_t^T g ds − ∫_t^T Z dH`.
///
/// Unset coefficients are zero.
#[derive(Clone)]
pub struct FbsdeProblem {
    p: usize,
    q: usize,
    m: usize,
    horizon: f64,
    f: DriverFn,
    sigma: VolatilityFn,
    g: DriverFn,
    h: TerminalFn,
    z_dependent: bool,
}

impl fmt::Debug for FbsdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FbsdeProblem")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("m", &self.m)
            .field("horizon", &self.horizon)
            .field("z_dependent", &self.z_dependent)
            .finish_non_exhaustive()
    }
}

impl FbsdeProblem {
    pub fn new(p: usize, q: usize, m: usize, horizon: f64) -> Result<Self> {
        if p == 0 || p > MAX_DIM {
            return Err(FbsdeError::InvalidProblem(format!(
                "forward dimension P = {p} outside 1..={MAX_DIM}"
            )));
        }
        if q == 0 || q > MAX_DIM {
            return Err(FbsdeError::InvalidProblem(format!(
                "backward dimension Q = {q} outside 1..={MAX_DIM}"
            )));
        }
        if m == 0 {
            return Err(FbsdeError::InvalidProblem("chaos order M must be ≥ 1".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(FbsdeError::InvalidProblem(format!(
                "horizon T = {horizon} must be positive"
            )));
        }
        Ok(Self {
            p,
            q,
            m,
            horizon,
            f: Arc::new(move |_, _, _, _| vec![0.0; p]),
            sigma: Arc::new(move |_, _, _| vec![0.0; p * m]),
            g: Arc::new(move |_, _, _, _| vec![0.0; q]),
            h: Arc::new(move |_| vec![0.0; q]),
            z_dependent: false,
        })
    }

    pub fn with_drift<F>(mut self, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.f = Arc::new(f);
        self
    }

    pub fn with_sigma<F>(mut self, sigma: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.sigma = Arc::new(sigma);
        self
    }

    pub fn with_driver<F>(mut self, g: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.g = Arc::new(g);
        self
    }

    pub fn with_terminal<F>(mut self, h: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.h = Arc::new(h);
        self
    }

    /// Declares that `f` or `g` reads its `z` argument.
    pub fn with_z_dependence(mut self, z_dependent: bool) -> Self {
        self.z_dependent = z_dependent;
        self
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_z_dependent(&self) -> bool {
        self.z_dependent
    }

    pub fn drift(&self, t: f64, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        (self.f)(t, x, y, z)
    }

    pub fn sigma(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        (self.sigma)(t, x, y)
    }

    pub fn driver(&self, t: f64, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        (self.g)(t, x, y, z)
    }

    pub fn terminal(&self, x: &[f64]) -> Vec<f64> {
        (self.h)(x)
    }

    /// Evaluates every coefficient once at `x` and checks output lengths and finiteness.
    pub fn validate_at(&self, x: &[f64]) -> Result<()> {
        let y = self.terminal(x);
        let z = vec![0.0; self.q * self.m];
        let checks: [(&str, Vec<f64>, usize); 4] = [
            ("h", y.clone(), self.q),
            ("f", self.drift(0.0, x, &y, &z), self.p),
            ("sigma", self.sigma(0.0, x, &y), self.p * self.m),
            ("g", self.driver(0.0, x, &y, &z), self.q),
        ];
        for (name, value, expected) in checks {
            if value.len() != expected {
                return Err(FbsdeError::InvalidProblem(format!(
                    "{name} returned {} components, expected {expected}",
                    value.len()
                )));
            }
            if value.iter().any(|v| !v.is_finite()) {
                return Err(FbsdeError::InvalidProblem(format!(
                    "{name} is not finite at x = {x:?}"
                )));
            }
        }
        Ok(())
    }
}
