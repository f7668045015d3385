//! Pass/fail outcomes reported by the commands.

use std::fmt;

/// One verified property, named after the module invariant it exercises.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub message: String,
}

impl Check {
    /// Passes when `value < limit`.
    pub fn below(module: &str, what: &str, value: f64, limit: f64) -> Self {
        Self {
            passed: value < limit,
            message: format!("{module}: {what} = {value:.3e} (limit < {limit:e})"),
        }
    }

    /// Passes when `value ≤ limit`.
    pub fn at_most(module: &str, what: &str, value: f64, limit: f64) -> Self {
        Self {
            passed: value <= limit,
            message: format!("{module}: {what} = {value:.3e} (limit ≤ {limit:e})"),
        }
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(module: &str, what: &str, value: f64, limit: f64) -> Self {
        Self {
            passed: value >= limit,
            message: format!("{module}: {what} = {value:.3e} (limit ≥ {limit:e})"),
        }
    }

    pub fn flag(module: &str, what: &str, passed: bool, detail: impl fmt::Display) -> Self {
        Self {
            passed,
            message: format!("{module}: {what}: {detail}"),
        }
    }
}

/// `|mean| / SE`, with the SE floored at 1e−12 so that exact zeros do not divide by zero.
pub fn z_score(mean: f64, se: f64) -> f64 {
    mean.abs() / se.max(1e-12)
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}", self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_strict_or_inclusive_as_named() {
        assert!(!Check::below("m", "x", 1.0, 1.0).passed);
        assert!(Check::at_least("m", "x", 1.0, 1.0).passed);
        assert_eq!(
            Check::below("teugels", "residual", 0.0, 1e-9).to_string(),
            "[PASS] teugels: residual = 0.000e0 (limit < 1e-9)"
        );
    }
}
