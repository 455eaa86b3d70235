use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly_roots, Polynomial};
use crate::{Error, Result};

/// Ratio of two real polynomials in `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::domain("transfer function denominator is zero"));
        }
        Ok(TransferFunction { num, den })
    }

    /// Convenience constructor from descending-power coefficient lists.
    pub fn from_descending(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::from_descending(num), Polynomial::from_descending(den))
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Roots of the denominator. A static gain has no poles.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.den.degree() == 0 {
            return Vec::new();
        }
        poly_roots(&self.den).expect("nonzero denominator of degree >= 1")
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        if self.num.is_zero() || self.num.degree() == 0 {
            return Vec::new();
        }
        poly_roots(&self.num).expect("numerator of degree >= 1")
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.eval(0.0) / self.den.eval(0.0)
    }

    /// Closed-loop characteristic polynomial `den(s) + k num(s)` of the
    /// unity negative-feedback loop around `k G(s)`.
    pub fn characteristic(&self, k: f64) -> Polynomial {
        &self.den + &self.num.scale(k)
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_denominator_rejected() {
        let err = TransferFunction::new(Polynomial::constant(1.0), Polynomial::zero());
        assert!(err.is_err());
    }

    #[test]
    fn properness() {
        let g = TransferFunction::from_descending(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(g.is_proper());
        assert!(!g.is_strictly_proper());
        let h = TransferFunction::from_descending(&[1.0, 0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(!h.is_proper());
    }

    #[test]
    fn characteristic_polynomial() {
        let g = TransferFunction::from_descending(&[1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(g.characteristic(2.0).coeffs(), &[3.0, 1.0]);
    }
}
