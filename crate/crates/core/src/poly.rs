//! Dense polynomials in the monomial basis.

use std::ops::{Add, Mul, Sub};

/// A real polynomial stored by monomial coefficients, `coeffs[k]` multiplying `x^k`.
///
/// Trailing zero coefficients are trimmed, so the zero polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Multiplies by `x`, shifting every coefficient up by one power.
    pub fn shift(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Polynomial) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    + s * other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Self::new(coeffs)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.axpy(-1.0, rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_and_evaluates() {
        let p = Polynomial::new(vec![1.0, -2.0, 3.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(2));
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 12.0);
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
        assert_eq!(Polynomial::zero().eval(3.0), 0.0);
    }

    #[test]
    fn shift_multiplies_by_x() {
        let q = Polynomial::new(vec![0.5, 2.0]);
        let p = q.shift();
        assert_eq!(p.coeffs(), &[0.0, 0.5, 2.0]);
        for x in [-1.5, 0.0, 0.3, 4.0] {
            assert_eq!(p.eval(x), x * q.eval(x));
        }
    }

    #[test]
    fn product_matches_pointwise() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![-1.0, 0.0, 2.0]);
        let c = &a * &b;
        for x in [-2.0, -0.1, 0.7, 3.0] {
            assert!((c.eval(x) - a.eval(x) * b.eval(x)).abs() < 1e-12);
        }
        assert_eq!((&a - &a).degree(), None);
    }
}
