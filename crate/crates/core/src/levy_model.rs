//! The driving Lévy process: a Brownian coefficient `a` and a finite-activity Lévy measure ν.
//!
//! Every measure is reduced at construction to a list of weighted points. For atomic measures these
//! are the atoms themselves; for densities they are composite Gauss–Legendre nodes with the density
//! folded into the weights. All integrals against ν, and against
//! `μ(dx) = x² ν(dx) + a² δ₀(dx)`, are finite sums over those points, so they are deterministic for a
//! fixed model.
//!
//! Only finite activity is supported. An infinite-activity measure must be truncated by the caller
//! to `|x| ≥ ε`; the small-jump mass is dropped, not replaced by a diffusion.

use gauss_quad::legendre::GaussLegendre;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{FbsdeError, Result};
use crate::poly::Polynomial;

/// A point mass of ν: jumps of size `location` arrive at rate `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(location: f64, weight: f64) -> Self {
        Self { location, weight }
    }
}

/// Shape of an absolutely continuous Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// Gaussian jump sizes restricted to the support and rescaled so that ν(ℝ) = `intensity`.
    TruncatedGaussian { intensity: f64, mean: f64, std: f64 },
    /// Piecewise-linear density through `(x, value)` points, zero outside the table.
    Table { points: Vec<(f64, f64)> },
}

/// An absolutely continuous Lévy measure on `[lo, hi] ∖ (−cutoff, cutoff)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMeasure {
    kind: DensityKind,
    support: (f64, f64),
    cutoff: f64,
    scale: f64,
    pieces: Vec<(f64, f64)>,
    nodes: Vec<Atom>,
    max_density: f64,
}

/// Default total number of quadrature nodes for a density measure.
pub const DEFAULT_DENSITY_NODES: usize = 64;

impl DensityMeasure {
    /// Builds the measure with [`DEFAULT_DENSITY_NODES`] quadrature nodes.
    pub fn new(kind: DensityKind, support: (f64, f64), cutoff: f64) -> Result<Self> {
        Self::with_nodes(kind, support, cutoff, None)
    }

    /// `nodes_per_panel` overrides the default split of 64 nodes across the quadrature panels.
    pub fn with_nodes(
        kind: DensityKind,
        support: (f64, f64),
        cutoff: f64,
        nodes_per_panel: Option<usize>,
    ) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FbsdeError::InvalidModel(format!(
                "density support [{lo}, {hi}] must be a finite non-empty interval"
            )));
        }
        if !(cutoff >= 0.0 && cutoff.is_finite()) {
            return Err(FbsdeError::InvalidModel(format!("cutoff {cutoff} must be ≥ 0")));
        }
        let mut pieces = Vec::new();
        if lo < -cutoff {
            pieces.push((lo, hi.min(-cutoff)));
        }
        if hi > cutoff {
            pieces.push((lo.max(cutoff), hi));
        }
        pieces.retain(|(a, b)| b > a);
        if pieces.is_empty() {
            return Err(FbsdeError::InvalidModel(
                "density support lies entirely inside the cutoff neighborhood of 0".into(),
            ));
        }
        if pieces.iter().any(|&(a, b)| a <= 0.0 && b >= 0.0) {
            return Err(FbsdeError::InvalidModel(
                "density support must exclude a neighborhood of 0 (set a positive cutoff)".into(),
            ));
        }

        match &kind {
            DensityKind::TruncatedGaussian {
                intensity,
                mean,
                std,
            } => {
                if !(*intensity >= 0.0 && intensity.is_finite()) {
                    return Err(FbsdeError::InvalidModel(format!(
                        "intensity {intensity} must be finite and ≥ 0"
                    )));
                }
                if !(*std > 0.0 && std.is_finite() && mean.is_finite()) {
                    return Err(FbsdeError::InvalidModel(format!(
                        "Gaussian parameters mean {mean}, std {std} are invalid"
                    )));
                }
            }
            DensityKind::Table { points } => {
                if points.len() < 2 {
                    return Err(FbsdeError::InvalidModel(
                        "density table needs at least two points".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(FbsdeError::InvalidModel(
                        "density table abscissae must be strictly increasing".into(),
                    ));
                }
                if points.iter().any(|&(x, v)| !x.is_finite() || !(v >= 0.0 && v.is_finite())) {
                    return Err(FbsdeError::InvalidModel(
                        "density table values must be finite and ≥ 0".into(),
                    ));
                }
            }
        }

        // Panels: each support piece, further split at table breakpoints so that the
        // piecewise-linear density is smooth on every panel.
        let mut panels = Vec::new();
        for &(a, b) in &pieces {
            let mut cuts = vec![a];
            if let DensityKind::Table { points } = &kind {
                cuts.extend(points.iter().map(|p| p.0).filter(|&x| x > a && x < b));
            }
            cuts.push(b);
            panels.extend(cuts.windows(2).map(|w| (w[0], w[1])));
        }
        let per_panel = nodes_per_panel
            .unwrap_or_else(|| (DEFAULT_DENSITY_NODES / panels.len()).max(2))
            .max(2);
        let rule = GaussLegendre::new(per_panel)
            .map_err(|e| FbsdeError::InvalidModel(format!("quadrature rule: {e}")))?;

        let mut measure = Self {
            kind,
            support,
            cutoff,
            scale: 1.0,
            pieces,
            nodes: Vec::new(),
            max_density: 0.0,
        };

        let mut raw = Vec::with_capacity(per_panel * panels.len());
        for &(a, b) in &panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            for &(node, weight) in rule.as_node_weight_pairs() {
                let x = mid + half * node;
                raw.push(Atom::new(x, half * weight * measure.raw_density(x)));
            }
        }
        if let DensityKind::TruncatedGaussian { intensity, .. } = measure.kind {
            let mass: f64 = raw.iter().map(|a| a.weight).sum();
            if mass <= 0.0 {
                return Err(FbsdeError::InvalidModel(
                    "truncated Gaussian has no mass on its support".into(),
                ));
            }
            measure.scale = intensity / mass;
        }
        for atom in &mut raw {
            atom.weight *= measure.scale;
        }
        measure.nodes = raw;
        measure.max_density = measure.density_bound(&panels);
        Ok(measure)
    }

    fn raw_density(&self, x: f64) -> f64 {
        if !self.pieces.iter().any(|&(a, b)| x >= a && x <= b) {
            return 0.0;
        }
        match &self.kind {
            DensityKind::TruncatedGaussian { mean, std, .. } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            DensityKind::Table { points } => {
                let first = points[0].0;
                let last = points[points.len() - 1].0;
                if x < first || x > last {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 <= x).clamp(1, points.len() - 1);
                let (x0, v0) = points[k - 1];
                let (x1, v1) = points[k];
                v0 + (v1 - v0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Density of ν at `x`.
    pub fn density(&self, x: f64) -> f64 {
        self.scale * self.raw_density(x)
    }

    fn density_bound(&self, panels: &[(f64, f64)]) -> f64 {
        let mut bound: f64 = 0.0;
        for &(a, b) in panels {
            for k in 0..=256 {
                let x = a + (b - a) * k as f64 / 256.0;
                bound = bound.max(self.density(x));
            }
        }
        if let DensityKind::TruncatedGaussian { mean, .. } = self.kind {
            for &(a, b) in &self.pieces {
                bound = bound.max(self.density(mean.clamp(a, b)));
            }
        }
        bound
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Quadrature nodes with the density folded into the weights.
    pub fn nodes(&self) -> &[Atom] {
        &self.nodes
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lengths: Vec<f64> = self.pieces.iter().map(|(a, b)| b - a).collect();
        let total: f64 = lengths.iter().sum();
        loop {
            let mut u = rng.gen::<f64>() * total;
            let mut x = self.pieces[0].0;
            for (&(a, _), &len) in self.pieces.iter().zip(&lengths) {
                if u <= len {
                    x = a + u;
                    break;
                }
                u -= len;
            }
            if rng.gen::<f64>() * self.max_density <= self.density(x) {
                return x;
            }
        }
    }
}

/// A finite-activity Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyMeasure {
    Atomic(Vec<Atom>),
    Density(DensityMeasure),
}

impl LevyMeasure {
    /// The zero measure (no jumps).
    pub fn none() -> Self {
        LevyMeasure::Atomic(Vec::new())
    }

    pub fn atomic(atoms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        LevyMeasure::Atomic(atoms.into_iter().map(|(x, w)| Atom::new(x, w)).collect())
    }

    /// Weighted points representing ν: exact atoms or quadrature nodes.
    pub fn points(&self) -> &[Atom] {
        match self {
            LevyMeasure::Atomic(atoms) => atoms,
            LevyMeasure::Density(d) => d.nodes(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.points().iter().map(|a| a.weight).sum()
    }

    fn validate(&self) -> Result<()> {
        if let LevyMeasure::Atomic(atoms) = self {
            for atom in atoms {
                if !(atom.weight >= 0.0 && atom.weight.is_finite()) {
                    return Err(FbsdeError::InvalidModel(format!(
                        "atom weight {} must be finite and ≥ 0",
                        atom.weight
                    )));
                }
                if !atom.location.is_finite() {
                    return Err(FbsdeError::InvalidModel("atom location must be finite".into()));
                }
                if atom.location == 0.0 {
                    return Err(FbsdeError::InvalidModel("a Lévy measure has no atom at 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Driving Lévy process: Brownian coefficient `a` (the mass of μ at 0 is `a²`) and Lévy measure ν.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    a: f64,
    measure: LevyMeasure,
}

impl LevyModel {
    pub fn new(a: f64, measure: LevyMeasure) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(FbsdeError::InvalidModel(format!("a = {a} must be finite and ≥ 0")));
        }
        measure.validate()?;
        if a == 0.0 && measure.total_mass() == 0.0 {
            return Err(FbsdeError::InvalidModel(
                "a = 0 with the zero Lévy measure drives nothing".into(),
            ));
        }
        Ok(Self { a, measure })
    }

    /// Pure Brownian driver with variance `a² t`.
    pub fn brownian(a: f64) -> Result<Self> {
        Self::new(a, LevyMeasure::none())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.measure
    }

    /// ν(ℝ), the jump arrival rate.
    pub fn jump_intensity(&self) -> f64 {
        self.measure.total_mass()
    }

    /// Signed moment `∫ x^k ν(dx)`.
    pub fn nu_moment(&self, k: u32) -> f64 {
        self.nu_integral(|x| x.powi(k as i32))
    }

    /// `∫ f(y) ν(dy)`.
    pub fn nu_integral<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.measure
            .points()
            .iter()
            .map(|atom| atom.weight * f(atom.location))
            .sum()
    }

    /// `∫ p₁ p₂ dμ` with `μ(dx) = x² ν(dx) + a² δ₀(dx)`.
    pub fn mu_inner(&self, p1: &Polynomial, p2: &Polynomial) -> f64 {
        let jumps = self.nu_integral(|x| x * x * p1.eval(x) * p2.eval(x));
        jumps + self.a * self.a * p1.eval(0.0) * p2.eval(0.0)
    }

    /// Draws one jump size from ν / ν(ℝ).
    pub fn sample_jump_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.measure {
            LevyMeasure::Atomic(atoms) => {
                let index = WeightedIndex::new(atoms.iter().map(|a| a.weight))
                    .expect("sampling jumps from a measure with positive mass");
                atoms[index.sample(rng)].location
            }
            LevyMeasure::Density(d) => d.sample(rng),
        }
    }
}
