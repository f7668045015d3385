//! Experiment configuration.
//!
//! A config is a JSON document deserialized into [`ExperimentConfig`]. Every field has a default,
//! so an empty object is a valid config. Overrides given as `--set dotted.path=value` are applied
//! to the JSON tree before deserialization; `value` is parsed as JSON and falls back to a plain
//! string, and numeric path segments index arrays (`grid.0.n=201`).

use std::fmt;
use std::path::Path;

use levy_fbsde::{
    DensityKind, DensityMeasure, GridAxis, LevyMeasure, LevyModel, MarketModel, Payoff,
    SolverConfig, SolverMode, SpatialGrid,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A configuration problem, tied to the dotted key that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Chaos truncation order `M`.
    pub order: usize,
    pub seed: u64,
    pub simulate: SimulateSpec,
    pub problem: ProblemSpec,
    pub grid: Vec<GridSpec>,
    pub solver: SolverSpec,
    pub residual: ResidualSpec,
    pub market: MarketSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            order: 3,
            seed: 42,
            simulate: SimulateSpec::default(),
            problem: ProblemSpec::default(),
            grid: vec![GridSpec {
                lo: -8.0,
                hi: 8.0,
                n: 401,
            }],
            solver: SolverSpec::default(),
            residual: ResidualSpec::default(),
            market: MarketSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub a: f64,
    pub measure: MeasureSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            a: 1.0,
            measure: MeasureSpec::Atomic {
                atoms: vec![[1.0, 1.0], [-1.0, 1.0]],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityShape {
    TruncatedGaussian,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    None,
    /// `[location, weight]` pairs.
    Atomic { atoms: Vec<[f64; 2]> },
    Density {
        support: [f64; 2],
        kind: DensityShape,
        #[serde(default)]
        cutoff: f64,
        #[serde(default)]
        intensity: Option<f64>,
        #[serde(default)]
        mean: Option<f64>,
        #[serde(default)]
        std: Option<f64>,
        #[serde(default)]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        nodes_per_panel: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    /// Paths used by the jump-sum representation check.
    pub chaos_paths: usize,
    /// Number of leading paths written to `paths.csv`.
    pub dump_paths: usize,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_steps: 200,
            n_paths: 10_000,
            chaos_paths: 100,
            dump_paths: 10,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// The FBSDE solved by `solve`. All presets have `P = Q = 1`; `sigma` lists the constant loadings
/// `σ_1 … σ_k` (`k ≤ M`, the rest are zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Terminal value `exp(−x²/2)`, constant drift and loadings, no driver.
    Bump {
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default)]
        drift: f64,
        #[serde(default)]
        sigma: Vec<f64>,
    },
    /// Terminal value `value`, constant drift and loadings, no driver.
    Constant {
        #[serde(default = "one")]
        horizon: f64,
        #[serde(default = "one")]
        value: f64,
        #[serde(default)]
        drift: f64,
        #[serde(default)]
        sigma: Vec<f64>,
    },
    /// `σ = (0.4 + 0.3 sin y, 0.2 cos y)`, `g = 4 sin y`, `h = exp(−x²/2)`; needs `M = 2`.
    Coupled {
        #[serde(default = "one")]
        horizon: f64,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Bump {
            horizon: 1.0,
            drift: 0.0,
            sigma: vec![0.4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Strict,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub fp_tol: f64,
    pub fp_max: usize,
    pub theta_scheme: f64,
    pub n_time: usize,
    pub min_dt_split: f64,
    pub mode: ModeSpec,
    pub jump_cfl: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let base = SolverConfig::default();
        Self {
            fp_tol: base.fp_tol,
            fp_max: base.fp_max,
            theta_scheme: base.theta_scheme,
            n_time: base.n_time,
            min_dt_split: base.min_dt_split,
            mode: match base.mode {
                SolverMode::Strict => ModeSpec::Strict,
                SolverMode::Extended => ModeSpec::Extended,
            },
            jump_cfl: base.jump_cfl,
        }
    }
}

/// Forward simulation and backward residuals run by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSpec {
    pub x0: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
}

impl Default for ResidualSpec {
    fn default() -> Self {
        Self {
            x0: vec![0.0],
            n_paths: 1000,
            n_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffSpec {
    Call { strike: f64 },
    Put { strike: f64 },
    Constant { value: f64 },
    #[serde(rename = "custom-table", alias = "custom_table")]
    CustomTable { points: Vec<[f64; 2]> },
}

/// A market with constant log-price coefficients and a constant rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSpec {
    pub d: usize,
    pub r0: f64,
    pub maturity: f64,
    pub s0: Vec<f64>,
    /// Log-price drift per asset.
    pub f_log: Vec<f64>,
    /// Log-price loadings, one row of up to `M` entries per asset.
    pub sigma_log: Vec<Vec<f64>>,
    pub payoff: PayoffSpec,
    /// Log-price grid; defaults to `log S0 ± 2` with 401 points per asset.
    pub grid: Option<Vec<GridSpec>>,
    pub hedge: HedgeSpec,
}

impl Default for MarketSpec {
    fn default() -> Self {
        Self {
            d: 1,
            r0: 0.05,
            maturity: 0.25,
            s0: vec![100.0],
            f_log: vec![0.03],
            sigma_log: vec![vec![0.2]],
            payoff: PayoffSpec::Call { strike: 100.0 },
            grid: None,
            hedge: HedgeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgeSpec {
    pub n_paths: usize,
    pub n_steps: usize,
}

impl Default for HedgeSpec {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            n_steps: 200,
        }
    }
}

/// Reads `path` (or starts from `{}`), applies the overrides and deserializes.
pub fn load(path: Option<&Path>, overrides: &[String]) -> ConfigResult<ExperimentConfig> {
    let mut tree = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| ConfigError::new("", format!("{} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    for item in overrides {
        apply_override(&mut tree, item)?;
    }
    from_value(tree)
}

pub fn from_value(tree: Value) -> ConfigResult<ExperimentConfig> {
    let config: ExperimentConfig = serde_path_to_error::deserialize(tree).map_err(|e| {
        let key = e.path().to_string();
        let key = if key == "." { String::new() } else { key };
        ConfigError::new(key, e.into_inner())
    })?;
    config.validate()?;
    Ok(config)
}

/// Applies one `dotted.path=value` override to a JSON tree.
pub fn apply_override(tree: &mut Value, item: &str) -> ConfigResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::new(item, "override must have the form key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::new(key, "empty path segment in override"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let segments: Vec<&str> = key.split('.').collect();
    let mut node = tree;
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    ConfigError::new(segments[..=depth].join("."), "expected an array index")
                })?;
                if idx > items.len() {
                    return Err(ConfigError::new(
                        segments[..=depth].join("."),
                        format!("index {idx} is past the end of an array of {}", items.len()),
                    ));
                }
                if idx == items.len() {
                    items.push(Value::Null);
                }
                if last {
                    items[idx] = value;
                    return Ok(());
                }
                &mut items[idx]
            }
            _ => {
                return Err(ConfigError::new(
                    segments[..depth].join("."),
                    "cannot descend into a scalar",
                ))
            }
        };
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> ConfigResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("{v} must be positive and finite")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> ConfigResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(ConfigError::new(key, format!("{v} must be ≥ {min}")))
    }
}

fn grid_from(key: &str, specs: &[GridSpec]) -> ConfigResult<SpatialGrid> {
    if specs.is_empty() || specs.len() > 2 {
        return Err(ConfigError::new(key, "one or two grid axes are supported"));
    }
    for (k, g) in specs.iter().enumerate() {
        if !(g.lo.is_finite() && g.hi.is_finite() && g.lo < g.hi) {
            return Err(ConfigError::new(
                format!("{key}.{k}"),
                format!("bounds [{}, {}] must be finite with lo < hi", g.lo, g.hi),
            ));
        }
        at_least(&format!("{key}.{k}.n"), g.n, 16)?;
    }
    SpatialGrid::new(specs.iter().map(|g| GridAxis::new(g.lo, g.hi, g.n)).collect())
        .map_err(|e| ConfigError::new(key, e))
}

impl ExperimentConfig {
    /// Range checks that do not need the core constructors.
    pub fn validate(&self) -> ConfigResult<()> {
        if !(self.model.a >= 0.0 && self.model.a.is_finite()) {
            return Err(ConfigError::new("model.a", format!("{} must be ≥ 0", self.model.a)));
        }
        if !(1..=10).contains(&self.order) {
            return Err(ConfigError::new("order", format!("{} must be in 1..=10", self.order)));
        }
        positive("simulate.horizon", self.simulate.horizon)?;
        at_least("simulate.n_steps", self.simulate.n_steps, 1)?;
        at_least("simulate.n_paths", self.simulate.n_paths, 100)?;
        at_least("residual.n_steps", self.residual.n_steps, 1)?;
        at_least("market.hedge.n_steps", self.market.hedge.n_steps, 1)?;
        let s = &self.solver;
        positive("solver.fp_tol", s.fp_tol)?;
        at_least("solver.fp_max", s.fp_max, 1)?;
        if !(0.0..=1.0).contains(&s.theta_scheme) {
            return Err(ConfigError::new(
                "solver.theta_scheme",
                format!("{} must lie in [0, 1]", s.theta_scheme),
            ));
        }
        at_least("solver.n_time", s.n_time, 1)?;
        positive("solver.min_dt_split", s.min_dt_split)?;
        positive("solver.jump_cfl", s.jump_cfl)?;
        match &self.problem {
            ProblemSpec::Bump { horizon, sigma, .. } | ProblemSpec::Constant { horizon, sigma, .. } => {
                positive("problem.horizon", *horizon)?;
                if sigma.len() > self.order {
                    return Err(ConfigError::new(
                        "problem.sigma",
                        format!("{} loadings exceed the order {}", sigma.len(), self.order),
                    ));
                }
            }
            ProblemSpec::Coupled { horizon } => {
                positive("problem.horizon", *horizon)?;
                if self.order != 2 {
                    return Err(ConfigError::new("order", "the coupled problem needs order 2"));
                }
            }
        }
        Ok(())
    }

    pub fn levy_model(&self) -> ConfigResult<LevyModel> {
        let measure = match &self.model.measure {
            MeasureSpec::None => LevyMeasure::none(),
            MeasureSpec::Atomic { atoms } => LevyMeasure::atomic(atoms.iter().map(|[x, w]| (*x, *w))),
            MeasureSpec::Density {
                support,
                kind,
                cutoff,
                intensity,
                mean,
                std,
                points,
                nodes_per_panel,
            } => {
                let need = |name: &str, v: Option<f64>| {
                    v.ok_or_else(|| {
                        ConfigError::new(format!("model.measure.{name}"), "required for this density kind")
                    })
                };
                let kind = match kind {
                    DensityShape::TruncatedGaussian => DensityKind::TruncatedGaussian {
                        intensity: need("intensity", *intensity)?,
                        mean: mean.unwrap_or(0.0),
                        std: need("std", *std)?,
                    },
                    DensityShape::Table => DensityKind::Table {
                        points: points
                            .as_ref()
                            .ok_or_else(|| {
                                ConfigError::new("model.measure.points", "required for a table density")
                            })?
                            .iter()
                            .map(|[x, v]| (*x, *v))
                            .collect(),
                    },
                };
                let density = DensityMeasure::with_nodes(
                    kind,
                    (support[0], support[1]),
                    *cutoff,
                    *nodes_per_panel,
                )
                .map_err(|e| ConfigError::new("model.measure", e))?;
                LevyMeasure::Density(density)
            }
        };
        LevyModel::new(self.model.a, measure).map_err(|e| ConfigError::new("model", e))
    }

    pub fn spatial_grid(&self) -> ConfigResult<SpatialGrid> {
        grid_from("grid", &self.grid)
    }

    pub fn solver_config(&self) -> ConfigResult<SolverConfig> {
        let s = &self.solver;
        let config = SolverConfig {
            fp_tol: s.fp_tol,
            fp_max: s.fp_max,
            theta_scheme: s.theta_scheme,
            n_time: s.n_time,
            min_dt_split: s.min_dt_split,
            mode: match s.mode {
                ModeSpec::Strict => SolverMode::Strict,
                ModeSpec::Extended => SolverMode::Extended,
            },
            jump_cfl: s.jump_cfl,
            ..SolverConfig::default()
        };
        config.validate().map_err(|e| ConfigError::new("solver", e))?;
        Ok(config)
    }

    pub fn market_model(&self) -> ConfigResult<MarketModel> {
        let spec = &self.market;
        let d = spec.d;
        if !(1..=2).contains(&d) {
            return Err(ConfigError::new("market.d", format!("{d} must be 1 or 2")));
        }
        positive("market.maturity", spec.maturity)?;
        if !spec.r0.is_finite() {
            return Err(ConfigError::new("market.r0", "must be finite"));
        }
        for (key, len) in [
            ("market.s0", spec.s0.len()),
            ("market.f_log", spec.f_log.len()),
            ("market.sigma_log", spec.sigma_log.len()),
        ] {
            if len != d {
                return Err(ConfigError::new(key, format!("expected {d} entries, found {len}")));
            }
        }
        for (j, s) in spec.s0.iter().enumerate() {
            positive(&format!("market.s0.{j}"), *s)?;
        }
        let m = self.order;
        let mut sigma = vec![0.0; d * m];
        for (j, row) in spec.sigma_log.iter().enumerate() {
            if row.len() > m {
                return Err(ConfigError::new(
                    format!("market.sigma_log.{j}"),
                    format!("{} loadings exceed the order {m}", row.len()),
                ));
            }
            sigma[j * m..j * m + row.len()].copy_from_slice(row);
        }
        let payoff = match &spec.payoff {
            PayoffSpec::Call { strike } => Payoff::Call { strike: *strike },
            PayoffSpec::Put { strike } => Payoff::Put { strike: *strike },
            PayoffSpec::Constant { value } => Payoff::Constant { value: *value },
            PayoffSpec::CustomTable { points } => Payoff::Table {
                points: points.iter().map(|[s, v]| (*s, *v)).collect(),
            },
        };
        payoff.validate().map_err(|e| ConfigError::new("market.payoff", e))?;
        let drift = spec.f_log.clone();
        Ok(
            MarketModel::new(d, m, spec.maturity, spec.s0.clone())
                .map_err(|e| ConfigError::new("market", e))?
                .with_constant_rate(spec.r0)
                .with_log_drift(move |_, _, _, _| drift.clone())
                .with_log_sigma(move |_, _, _| sigma.clone())
                .with_payoff(payoff),
        )
    }

    pub fn market_grid(&self) -> ConfigResult<SpatialGrid> {
        match &self.market.grid {
            Some(specs) => grid_from("market.grid", specs),
            None => {
                let specs: Vec<GridSpec> = self
                    .market
                    .s0
                    .iter()
                    .map(|s| GridSpec {
                        lo: s.ln() - 2.0,
                        hi: s.ln() + 2.0,
                        n: 401,
                    })
                    .collect();
                grid_from("market.grid", &specs)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(from_value(json!({})).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut tree = json!({"solver": {"fp_tol": 1e-8}, "grid": [{"lo": -1, "hi": 1, "n": 16}]});
        apply_override(&mut tree, "solver.fp_tol=1e-9").unwrap();
        apply_override(&mut tree, "grid.0.n=201").unwrap();
        apply_override(&mut tree, "solver.mode=strict").unwrap();
        apply_override(&mut tree, "model.measure={\"type\":\"none\"}").unwrap();
        let config = from_value(tree).unwrap();
        assert_eq!(config.solver.fp_tol, 1e-9);
        assert_eq!(config.grid[0].n, 201);
        assert_eq!(config.solver.mode, ModeSpec::Strict);
        assert_eq!(config.model.measure, MeasureSpec::None);
    }

    #[test]
    fn errors_name_the_key() {
        let err = from_value(json!({"solver": {"fp_tol": "small"}})).unwrap_err();
        assert_eq!(err.key, "solver.fp_tol");
        let err = from_value(json!({"solver": {"fp_tl": 1.0}})).unwrap_err();
        assert_eq!(err.key, "solver.fp_tl");
        let err = from_value(json!({"grid": [{"lo": 0, "hi": 1, "n": 8}]}))
            .unwrap()
            .spatial_grid()
            .unwrap_err();
        assert_eq!(err.key, "grid.0.n");
        let err = from_value(json!({"solver": {"theta_scheme": 2.0}})).unwrap_err();
        assert_eq!(err.key, "solver.theta_scheme");
        let mut tree = json!({"order": 2});
        assert_eq!(apply_override(&mut tree, "order.x=1").unwrap_err().key, "order");
    }

    #[test]
    fn density_requires_its_parameters() {
        let config = from_value(json!({
            "model": {"a": 0.0, "measure": {"type": "density", "support": [0.1, 1.0], "kind": "truncated_gaussian", "std": 0.5}}
        }))
        .unwrap();
        assert_eq!(config.levy_model().unwrap_err().key, "model.measure.intensity");
    }

    #[test]
    fn market_rows_are_padded_to_the_order() {
        let config = from_value(json!({"order": 2, "market": {"sigma_log": [[0.2]]}})).unwrap();
        let market = config.market_model().unwrap();
        assert_eq!(market.m(), 2);
        let err = from_value(json!({"market": {"s0": [100.0, 50.0]}}))
            .unwrap()
            .market_model()
            .unwrap_err();
        assert_eq!(err.key, "market.s0");
        let err = from_value(json!({"market": {"d": 2, "s0": [100.0, 50.0]}}))
            .unwrap()
            .market_model()
            .unwrap_err();
        assert_eq!(err.key, "market.f_log");
    }
}
