//! Orthonormal polynomials for `μ(dx) = x² ν(dx) + a² δ₀(dx)` and the jump polynomials
//! `p_i(x) = x q_{i−1}(x)` that generate the orthogonalized Teugels martingales `H⁽ⁱ⁾`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{FbsdeError, Result};
use crate::levy_model::LevyModel;
use crate::poly::Polynomial;

/// Hard cap on the chaos order: monomial Gram matrices are hopeless in double precision beyond it.
pub const MAX_ORDER: usize = 10;

/// Largest acceptable condition number of the monomial Gram matrix of μ.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Smallest acceptable μ-norm of a Gram–Schmidt pivot.
pub const MIN_PIVOT_NORM: f64 = 1e-12;

/// Truncated orthonormal system `q_0 … q_{M−1}` with the derived jump polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct TeugelsBasis {
    order: usize,
    a: f64,
    q: Vec<Polynomial>,
    p: Vec<Polynomial>,
    q0: Vec<f64>,
    p_norms: Vec<f64>,
    p_means: Vec<f64>,
}

impl TeugelsBasis {
    /// Wraps an arbitrary polynomial system. No orthonormality is enforced, which makes this the
    /// entry point for checking perturbed systems with [`check_orthogonality`].
    pub fn from_polynomials(model: &LevyModel, q: Vec<Polynomial>) -> Result<Self> {
        let order = q.len();
        if order == 0 || order > MAX_ORDER {
            return Err(FbsdeError::InvalidModel(format!(
                "chaos order {order} outside 1..={MAX_ORDER}"
            )));
        }
        let p: Vec<Polynomial> = q.iter().map(Polynomial::shift).collect();
        let q0 = q.iter().map(|qi| qi.eval(0.0)).collect();
        let p_norms = p
            .iter()
            .map(|pi| model.nu_integral(|y| pi.eval(y).powi(2)))
            .collect();
        let p_means = p.iter().map(|pi| model.nu_integral(|y| pi.eval(y))).collect();
        Ok(Self {
            order,
            a: model.a(),
            q,
            p,
            q0,
            p_norms,
            p_means,
        })
    }

    /// Chaos truncation order M.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `q_0 … q_{M−1}`.
    pub fn q(&self) -> &[Polynomial] {
        &self.q
    }

    /// `p_1 … p_M`.
    pub fn p(&self) -> &[Polynomial] {
        &self.p
    }

    /// `q_{i−1}(0)` for `i = 1..=M`.
    pub fn q0(&self) -> &[f64] {
        &self.q0
    }

    /// `∫ p_i² dν`.
    pub fn p_norms(&self) -> &[f64] {
        &self.p_norms
    }

    /// `∫ p_i dν`, the compensator rate of the jump part of `H⁽ⁱ⁾`.
    pub fn p_means(&self) -> &[f64] {
        &self.p_means
    }

    /// `Σ_{i≤M} q_{i−1}(0)²`: the truncated A0 sum.
    pub fn tail_indicator(&self) -> f64 {
        self.q0.iter().map(|v| v * v).sum()
    }

    /// All `p_i(y)` at once.
    pub fn eval_p(&self, y: f64) -> Vec<f64> {
        self.p.iter().map(|pi| pi.eval(y)).collect()
    }
}

fn gram_condition(model: &LevyModel, m: usize) -> f64 {
    let a2 = model.a() * model.a();
    let gram = DMatrix::from_fn(m, m, |j, k| {
        let jumps = model.nu_moment((j + k + 2) as u32);
        if j == 0 && k == 0 {
            jumps + a2
        } else {
            jumps
        }
    });
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Orthonormalizes `1, x, …, x^{M−1}` under μ by modified Gram–Schmidt with one
/// re-orthogonalization pass. Each `q_{i−1}` has a positive leading coefficient.
pub fn build_basis(model: &LevyModel, order: usize) -> Result<TeugelsBasis> {
    if order == 0 || order > MAX_ORDER {
        return Err(FbsdeError::InvalidModel(format!(
            "chaos order {order} outside 1..={MAX_ORDER}"
        )));
    }

    let mut q: Vec<Polynomial> = Vec::with_capacity(order);
    for k in 0..order {
        let condition = gram_condition(model, k + 1);
        if !(condition <= MAX_GRAM_CONDITION) {
            return Err(FbsdeError::DegenerateMeasure {
                requested: order,
                max_feasible: k,
                reason: format!("Gram condition number {condition:.3e} at order {}", k + 1),
            });
        }

        let mut v = Polynomial::monomial(k);
        for _pass in 0..2 {
            for qj in &q {
                let proj = model.mu_inner(&v, qj);
                v = v.axpy(-proj, qj);
            }
        }
        let norm = model.mu_inner(&v, &v).sqrt();
        if !(norm >= MIN_PIVOT_NORM) {
            return Err(FbsdeError::DegenerateMeasure {
                requested: order,
                max_feasible: k,
                reason: format!("pivot norm {norm:.3e} at order {}", k + 1),
            });
        }
        let mut qk = v.scale(1.0 / norm);
        if qk.leading() < 0.0 {
            qk = qk.scale(-1.0);
        }
        q.push(qk);
    }
    TeugelsBasis::from_polynomials(model, q)
}

/// Residuals of the orthonormality relations of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    /// `|⟨q_{i−1}, q_{j−1}⟩_μ − δ_ij|`.
    pub gram: Vec<Vec<f64>>,
    /// `|∫ p_i p_j dν − δ_ij + a² q_{i−1}(0) q_{j−1}(0)|`.
    pub jump: Vec<Vec<f64>>,
    pub max_gram: f64,
    pub max_jump: f64,
}

impl OrthogonalityReport {
    pub fn max_residual(&self) -> f64 {
        self.max_gram.max(self.max_jump)
    }
}

pub fn check_orthogonality(basis: &TeugelsBasis, model: &LevyModel) -> OrthogonalityReport {
    let m = basis.order();
    let a2 = model.a() * model.a();
    let mut gram = vec![vec![0.0; m]; m];
    let mut jump = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let delta = if i == j { 1.0 } else { 0.0 };
            gram[i][j] = (model.mu_inner(&basis.q[i], &basis.q[j]) - delta).abs();
            let pp = model.nu_integral(|y| basis.p[i].eval(y) * basis.p[j].eval(y));
            jump[i][j] = (pp - delta + a2 * basis.q0[i] * basis.q0[j]).abs();
        }
    }
    let max_of = |rows: &Vec<Vec<f64>>| rows.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    OrthogonalityReport {
        max_gram: max_of(&gram),
        max_jump: max_of(&jump),
        gram,
        jump,
    }
}
