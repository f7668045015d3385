//! Fixtures shared by the benchmarks.

use levy_fbsde::{
    build_basis, FbsdeProblem, LevyMeasure, LevyModel, SolverConfig, SpatialGrid, TeugelsBasis,
};

pub fn two_atom_model() -> LevyModel {
    LevyModel::new(0.5, LevyMeasure::atomic([(1.0, 1.0), (-0.5, 2.0)])).expect("valid model")
}

pub fn basis(model: &LevyModel, order: usize) -> TeugelsBasis {
    build_basis(model, order).expect("feasible order")
}

/// Jump-diffusion bump problem with state-dependent loadings.
pub fn bump_problem() -> FbsdeProblem {
    FbsdeProblem::new(1, 1, 2, 0.5)
        .expect("valid dimensions")
        .with_sigma(|_, x, _| vec![0.4 + 0.1 * x[0].cos(), 0.2])
        .with_terminal(|x| vec![(-0.5 * x[0] * x[0]).exp()])
}

pub fn grid(n: usize) -> SpatialGrid {
    SpatialGrid::uniform_1d(-8.0, 8.0, n).expect("valid grid")
}

pub fn solver(n_time: usize) -> SolverConfig {
    SolverConfig {
        n_time,
        ..Default::default()
    }
}
