//! Tensor grids in one or two space dimensions, finite-difference stencils and interpolation.

use crate::error::{FbsdeError, Result};

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn half_extent(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Cell index and weight of the right neighbor, clamped to the axis.
    fn locate(&self, x: f64) -> (usize, f64, bool) {
        let mut u = (x - self.lo) / self.spacing();
        // Points within rounding of a node read the node value exactly.
        let nearest = u.round();
        if (u - nearest).abs() < 1e-9 {
            u = nearest;
        }
        if u <= 0.0 {
            return (0, 0.0, x < self.lo);
        }
        let last = (self.n - 1) as f64;
        if u >= last {
            return (self.n - 2, 1.0, x > self.hi);
        }
        let i = (u.floor() as usize).min(self.n - 2);
        (i, u - i as f64, false)
    }
}

/// Uniform tensor grid on a box in `ℝ^P`, `P ∈ {1, 2}`. Nodes are numbered with axis 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    axes: Vec<GridAxis>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(FbsdeError::InvalidConfig(format!(
                "spatial grids support 1 or 2 dimensions, got {}",
                axes.len()
            )));
        }
        for (k, axis) in axes.iter().enumerate() {
            if !(axis.lo.is_finite() && axis.hi.is_finite() && axis.lo < axis.hi) {
                return Err(FbsdeError::InvalidConfig(format!(
                    "grid axis {k}: bounds [{}, {}] are invalid",
                    axis.lo, axis.hi
                )));
            }
            if axis.n < MIN_POINTS {
                return Err(FbsdeError::InvalidConfig(format!(
                    "grid axis {k}: {} points, need at least {MIN_POINTS}",
                    axis.n
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn uniform_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![GridAxis::new(lo, hi, n)])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Per-axis stride in the flat node numbering.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[..axis].iter().map(|a| a.n).product()
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let n0 = self.axes[0].n;
        [node % n0, node / n0]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let idx = self.multi_index(node);
        self.axes
            .iter()
            .enumerate()
            .map(|(k, axis)| axis.point(idx[k]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(x)
            .all(|(axis, &v)| v >= axis.lo && v <= axis.hi)
    }

    /// Multilinear interpolation of a node-major field with `ncomp` components, with constant
    /// extension outside the box. Returns whether `x` had to be clamped.
    pub fn interpolate(&self, field: &[f64], ncomp: usize, x: &[f64], out: &mut [f64]) -> bool {
        match self.axes.len() {
            1 => {
                let (i, w, clamped) = self.axes[0].locate(x[0]);
                for c in 0..ncomp {
                    let a = field[i * ncomp + c];
                    let b = field[(i + 1) * ncomp + c];
                    out[c] = a + w * (b - a);
                }
                clamped
            }
            _ => {
                let (i, wi, ci) = self.axes[0].locate(x[0]);
                let (j, wj, cj) = self.axes[1].locate(x[1]);
                let n0 = self.axes[0].n;
                let at = |ii: usize, jj: usize, c: usize| field[(jj * n0 + ii) * ncomp + c];
                for c in 0..ncomp {
                    let lower = at(i, j, c) + wi * (at(i + 1, j, c) - at(i, j, c));
                    let upper = at(i, j + 1, c) + wi * (at(i + 1, j + 1, c) - at(i, j + 1, c));
                    out[c] = lower + wj * (upper - lower);
                }
                ci || cj
            }
        }
    }

    /// Stencil of `∂_axis` at `node` as `(node, weight)` pairs: central inside, one-sided
    /// second order on the boundary.
    pub(crate) fn first_derivative_stencil(&self, axis: usize, node: usize) -> [(usize, f64); 3] {
        let a = self.axes[axis];
        let h = a.spacing();
        let i = self.multi_index(node)[axis];
        let s = self.stride(axis);
        let base = node - i * s;
        let at = |k: usize| base + k * s;
        if i == 0 {
            [(at(0), -1.5 / h), (at(1), 2.0 / h), (at(2), -0.5 / h)]
        } else if i + 1 == a.n {
            [(at(i), 1.5 / h), (at(i - 1), -2.0 / h), (at(i - 2), 0.5 / h)]
        } else {
            [(at(i - 1), -0.5 / h), (at(i), 0.0), (at(i + 1), 0.5 / h)]
        }
    }

    /// Stencil of `∂²_axis` at `node`: central inside, four-point one-sided on the boundary.
    pub(crate) fn second_derivative_stencil(&self, axis: usize, node: usize) -> [(usize, f64); 4] {
        let a = self.axes[axis];
        let h2 = a.spacing().powi(2);
        let i = self.multi_index(node)[axis];
        let s = self.stride(axis);
        let base = node - i * s;
        let at = |k: usize| base + k * s;
        if i == 0 {
            [
                (at(0), 2.0 / h2),
                (at(1), -5.0 / h2),
                (at(2), 4.0 / h2),
                (at(3), -1.0 / h2),
            ]
        } else if i + 1 == a.n {
            [
                (at(i), 2.0 / h2),
                (at(i - 1), -5.0 / h2),
                (at(i - 2), 4.0 / h2),
                (at(i - 3), -1.0 / h2),
            ]
        } else {
            [
                (at(i - 1), 1.0 / h2),
                (at(i), -2.0 / h2),
                (at(i + 1), 1.0 / h2),
                (at(i), 0.0),
            ]
        }
    }

    /// `∂_axis` of component `c` at `node`, written as differences so constants give exact zero.
    pub fn derivative(&self, field: &[f64], ncomp: usize, c: usize, axis: usize, node: usize) -> f64 {
        let st = self.first_derivative_stencil(axis, node);
        let centre = field[node * ncomp + c];
        st.iter()
            .map(|&(k, w)| w * (field[k * ncomp + c] - centre))
            .sum()
    }

    /// `∂²_{kl}` of component `c` at `node`; mixed derivatives compose first-derivative stencils.
    pub fn second_derivative(
        &self,
        field: &[f64],
        ncomp: usize,
        c: usize,
        k: usize,
        l: usize,
        node: usize,
    ) -> f64 {
        let centre = field[node * ncomp + c];
        if k == l {
            self.second_derivative_stencil(k, node)
                .iter()
                .map(|&(m, w)| w * (field[m * ncomp + c] - centre))
                .sum()
        } else {
            self.mixed_stencil(k, l, node)
                .iter()
                .map(|&(m, w)| w * (field[m * ncomp + c] - centre))
                .sum()
        }
    }

    pub(crate) fn mixed_stencil(&self, k: usize, l: usize, node: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(9);
        for (m, wk) in self.first_derivative_stencil(k, node) {
            if wk == 0.0 {
                continue;
            }
            for (n, wl) in self.first_derivative_stencil(l, m) {
                if wl != 0.0 {
                    out.push((n, wk * wl));
                }
            }
        }
        out
    }
}
