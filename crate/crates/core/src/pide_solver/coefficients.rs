use crate::error::{FbsdeError, Result};
use crate::levy_model::{Atom, LevyModel};
use crate::teugels::TeugelsBasis;

use super::problem::FbsdeProblem;

/// The jump displacement `δ`, the diffusion matrix `β` and the gradient weights `c` derived from
/// a problem's `σ` and a truncated basis.
///
/// With `v^k = Σ_i σ_i^k q_{i−1}(0)`:
/// `δ(t, x, y, y′) = Σ_i σ_i p_i(y′)`, `β^{kl} = (a²/2) v^k v^l`, `c_i^k = a² q_{i−1}(0) v^k`.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    problem: FbsdeProblem,
    a2: f64,
    q0: Vec<f64>,
    nodes: Vec<Atom>,
    /// `p_i(y_w)` for every point `y_w` of ν, row-major by point.
    p_at_nodes: Vec<f64>,
    basis: TeugelsBasis,
}

pub fn assemble_coefficients(
    problem: &FbsdeProblem,
    basis: &TeugelsBasis,
    model: &LevyModel,
) -> Result<CoefficientSet> {
    if basis.order() != problem.m() {
        return Err(FbsdeError::BasisMismatch {
            basis: basis.order(),
            problem: problem.m(),
        });
    }
    if (basis.a() - model.a()).abs() > 1e-14 * (1.0 + model.a()) {
        return Err(FbsdeError::InvalidModel(format!(
            "basis built for a = {} but the model has a = {}",
            basis.a(),
            model.a()
        )));
    }
    let nodes = model.measure().points().to_vec();
    let p_at_nodes = nodes.iter().flat_map(|n| basis.eval_p(n.location)).collect();
    let set = CoefficientSet {
        problem: problem.clone(),
        a2: model.a() * model.a(),
        q0: basis.q0().to_vec(),
        nodes,
        p_at_nodes,
        basis: basis.clone(),
    };

    // Both expressions for c must agree if the basis is orthonormal for this model.
    let m = problem.m();
    let p = problem.p();
    let probe: Vec<f64> = (0..p * m)
        .map(|j| 1.0 + 0.37 * j as f64 - 0.11 * (j * j) as f64)
        .collect();
    let direct = set.c_direct_from_sigma(&probe);
    let closed = set.c_from_sigma(&probe);
    let scale = 1.0 + probe.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let gap = direct
        .iter()
        .zip(&closed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > 1e-9 * scale {
        return Err(FbsdeError::InvalidModel(format!(
            "basis is not orthonormal for this model: the two expressions for c differ by {gap:e}"
        )));
    }
    Ok(set)
}

impl CoefficientSet {
    pub fn problem(&self) -> &FbsdeProblem {
        &self.problem
    }

    pub fn basis(&self) -> &TeugelsBasis {
        &self.basis
    }

    pub fn p(&self) -> usize {
        self.problem.p()
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    /// Support points and masses of ν used in every jump integral.
    pub fn jump_nodes(&self) -> &[Atom] {
        &self.nodes
    }

    /// `p_1(y_w) … p_M(y_w)` at jump node `w`.
    pub fn p_at_node(&self, w: usize) -> &[f64] {
        let m = self.m();
        &self.p_at_nodes[w * m..(w + 1) * m]
    }

    pub fn sigma(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.problem.sigma(t, x, y)
    }

    /// `Σ_i σ_i^k v_i` for a row-major `σ` and weights `v`.
    fn contract(&self, sigma: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..self.p())
            .map(|k| sigma[k * m..(k + 1) * m].iter().zip(v).map(|(s, w)| s * w).sum())
            .collect()
    }

    pub fn delta_from_sigma(&self, sigma: &[f64], jump: f64) -> Vec<f64> {
        self.contract(sigma, &self.basis.eval_p(jump))
    }

    /// `δ` at the `w`-th support point of ν.
    pub fn delta_at_node(&self, sigma: &[f64], w: usize) -> Vec<f64> {
        self.contract(sigma, self.p_at_node(w))
    }

    pub fn delta(&self, t: f64, x: &[f64], y: &[f64], jump: f64) -> Vec<f64> {
        self.delta_from_sigma(&self.sigma(t, x, y), jump)
    }

    /// `∫ δ ν(dy′)`.
    pub fn delta_mean_from_sigma(&self, sigma: &[f64]) -> Vec<f64> {
        let mut mean = vec![0.0; self.p()];
        for (w, node) in self.nodes.iter().enumerate() {
            for (acc, d) in mean.iter_mut().zip(self.delta_at_node(sigma, w)) {
                *acc += node.weight * d;
            }
        }
        mean
    }

    /// `v^k = Σ_i σ_i^k q_{i−1}(0)`.
    pub fn brownian_loading(&self, sigma: &[f64]) -> Vec<f64> {
        self.contract(sigma, &self.q0)
    }

    /// Row-major `P × P`.
    pub fn beta_from_sigma(&self, sigma: &[f64]) -> Vec<f64> {
        let v = self.brownian_loading(sigma);
        let p = self.p();
        let mut beta = vec![0.0; p * p];
        for k in 0..p {
            for l in 0..p {
                beta[k * p + l] = 0.5 * self.a2 * v[k] * v[l];
            }
        }
        beta
    }

    pub fn beta(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.beta_from_sigma(&self.sigma(t, x, y))
    }

    /// Row-major `P × M`, closed form `a² q_{i−1}(0) v^k`.
    pub fn c_from_sigma(&self, sigma: &[f64]) -> Vec<f64> {
        let v = self.brownian_loading(sigma);
        let m = self.m();
        let mut c = vec![0.0; self.p() * m];
        for (k, vk) in v.iter().enumerate() {
            for i in 0..m {
                c[k * m + i] = self.a2 * self.q0[i] * vk;
            }
        }
        c
    }

    /// Row-major `P × M`, as `σ_i − ∫ δ p_i ν`.
    pub fn c_direct_from_sigma(&self, sigma: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut c = sigma.to_vec();
        for (w, node) in self.nodes.iter().enumerate() {
            let delta = self.delta_at_node(sigma, w);
            let pw = self.p_at_node(w);
            for (k, dk) in delta.iter().enumerate() {
                for i in 0..m {
                    c[k * m + i] -= node.weight * dk * pw[i];
                }
            }
        }
        c
    }

    pub fn c(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.c_from_sigma(&self.sigma(t, x, y))
    }

    pub fn c_direct(&self, t: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.c_direct_from_sigma(&self.sigma(t, x, y))
    }

    /// `(∫ |δ|² ν, ‖σ‖² − a² |v|²)`; equal up to rounding.
    pub fn delta_energy(&self, t: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
        let sigma = self.sigma(t, x, y);
        let lhs = self
            .nodes
            .iter()
            .enumerate()
            .map(|(w, node)| {
                node.weight
                    * self
                        .delta_at_node(&sigma, w)
                        .iter()
                        .map(|d| d * d)
                        .sum::<f64>()
            })
            .sum();
        let v = self.brownian_loading(&sigma);
        let rhs = sigma.iter().map(|s| s * s).sum::<f64>()
            - self.a2 * v.iter().map(|x| x * x).sum::<f64>();
        (lhs, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::LevyMeasure;
    use crate::teugels::build_basis;

    fn scalar_problem(m: usize, s: f64) -> FbsdeProblem {
        FbsdeProblem::new(1, 1, m, 1.0)
            .unwrap()
            .with_sigma(move |_, _, _| vec![s; m])
    }

    #[test]
    fn zero_sigma_gives_zero_coefficients() {
        let model = LevyModel::new(1.0, LevyMeasure::atomic([(1.0, 1.0)])).unwrap();
        let basis = build_basis(&model, 2).unwrap();
        let problem = FbsdeProblem::new(1, 1, 2, 1.0).unwrap();
        let set = assemble_coefficients(&problem, &basis, &model).unwrap();
        assert_eq!(set.delta(0.0, &[0.3], &[0.0], 1.0), vec![0.0]);
        assert_eq!(set.beta(0.0, &[0.3], &[0.0]), vec![0.0]);
        assert_eq!(set.c(0.0, &[0.3], &[0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn brownian_hand_values() {
        let model = LevyModel::brownian(1.0).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let set = assemble_coefficients(&scalar_problem(1, 0.3), &basis, &model).unwrap();
        assert!((set.beta(0.0, &[0.0], &[0.0])[0] - 0.045).abs() < 1e-15);
        assert!((set.c(0.0, &[0.0], &[0.0])[0] - 0.3).abs() < 1e-15);
        assert!((set.delta(0.0, &[0.0], &[0.0], 2.5)[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pure_jump_has_no_diffusion() {
        let model = LevyModel::new(0.0, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).unwrap();
        let basis = build_basis(&model, 2).unwrap();
        let set = assemble_coefficients(&scalar_problem(2, 0.7), &basis, &model).unwrap();
        assert_eq!(set.beta(0.0, &[0.0], &[0.0]), vec![0.0]);
        assert_eq!(set.c(0.0, &[0.0], &[0.0]), vec![0.0, 0.0]);
        let direct = set.c_direct(0.0, &[0.0], &[0.0]);
        assert!(direct.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn basis_order_must_match() {
        let model = LevyModel::brownian(1.0).unwrap();
        let basis = build_basis(&model, 1).unwrap();
        let err = assemble_coefficients(&scalar_problem(2, 1.0), &basis, &model).unwrap_err();
        assert_eq!(err, FbsdeError::BasisMismatch { basis: 1, problem: 2 });
    }

    #[test]
    fn energy_identity() {
        let model =
            LevyModel::new(0.6, LevyMeasure::atomic([(1.0, 0.5), (-0.7, 1.5), (0.3, 2.0)]))
                .unwrap();
        let basis = build_basis(&model, 3).unwrap();
        let problem = FbsdeProblem::new(2, 1, 3, 1.0)
            .unwrap()
            .with_sigma(|_, x, y| vec![x[0], 0.2, -y[0], 1.0, x[1], 0.5]);
        let set = assemble_coefficients(&problem, &basis, &model).unwrap();
        let (lhs, rhs) = set.delta_energy(0.0, &[0.4, -1.2], &[0.9]);
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        let beta = set.beta(0.0, &[0.4, -1.2], &[0.9]);
        assert_eq!(beta[1], beta[2]);
        assert!(beta[0] >= 0.0 && beta[3] >= 0.0);
        assert!((beta[0] * beta[3] - beta[1] * beta[2]).abs() < 1e-14);
    }
}
