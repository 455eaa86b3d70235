use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::sort_roots;
use crate::{Error, Result};

/// Real polynomial in the Laplace variable, coefficients in ascending power
/// order. Trailing (highest-order) zeros are always stripped, so the zero
/// polynomial has no coefficients at all.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from ascending-power coefficients.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    /// Builds a polynomial from descending-power coefficients, the order
    /// transfer functions are usually written in.
    pub fn from_descending(coeffs: &[f64]) -> Self {
        Polynomial::new(coeffs.iter().rev().copied().collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Polynomial::constant(1.0), |acc, &r| {
            acc * Polynomial::new(vec![-r, 1.0])
        })
    }

    /// Monic polynomial with the given roots. Complex roots must come in
    /// conjugate pairs for the result to be real; the imaginary residue of
    /// the expansion is discarded.
    pub fn from_complex_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            acc = next;
        }
        Polynomial::new(acc.into_iter().map(|c| c.re).collect())
    }

    /// Ascending-power coefficients.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Descending-power coefficients.
    pub fn descending(&self) -> Vec<f64> {
        self.coeffs.iter().rev().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Highest-order coefficient (0 for the zero polynomial).
    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Coefficient of `s^k`.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn roots(&self) -> Result<Vec<Complex64>> {
        poly_roots(self)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            let sign = if c < 0.0 { "-" } else { "+" };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mag = c.abs();
            match k {
                0 => write!(f, "{mag}")?,
                _ if mag == 1.0 => {}
                _ => write!(f, "{mag}")?,
            }
            match k {
                0 => {}
                1 => write!(f, "s")?,
                _ => write!(f, "s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

/// Exact convolution of the coefficient sequences.
pub fn poly_mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() || b.is_zero() {
        return Polynomial::zero();
    }
    let mut out = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
    for (i, &x) in a.coeffs.iter().enumerate() {
        for (j, &y) in b.coeffs.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Polynomial::new(out)
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        poly_mul(&self, &rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        poly_mul(self, rhs)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

const NEWTON_ITERS: usize = 8;

/// All roots of `p` with multiplicity, sorted by real then imaginary part.
///
/// Roots are the eigenvalues of the companion matrix of the monic
/// polynomial, each then polished by a few Newton steps on the original
/// coefficients (a step is kept only if it lowers the residual).
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    if p.is_zero() {
        return Err(Error::domain("roots of the zero polynomial are undefined"));
    }
    if p.degree() == 0 {
        return Err(Error::domain("constant polynomial has no roots"));
    }
    if p.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::domain("polynomial has non-finite coefficients"));
    }

    // Exact zero roots first; they would otherwise make the companion
    // matrix singular for no benefit.
    let zeros = p.coeffs.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &p.coeffs[zeros..];
    let n = reduced.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];

    if n == 1 {
        roots.push(Complex64::new(-reduced[0] / reduced[1], 0.0));
    } else if n > 1 {
        let lead = reduced[n];
        let companion = DMatrix::from_fn(n, n, |i, j| {
            if j == n - 1 {
                -reduced[i] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let eig = companion.complex_eigenvalues();
        let deriv = p.derivative();
        for mut z in eig.iter().copied() {
            let mut res = p.eval_complex(z).norm();
            for _ in 0..NEWTON_ITERS {
                let d = deriv.eval_complex(z);
                if d.norm() == 0.0 || res == 0.0 {
                    break;
                }
                let cand = z - p.eval_complex(z) / d;
                let cand_res = p.eval_complex(cand).norm();
                if !(cand_res < res) {
                    break;
                }
                z = cand;
                res = cand_res;
            }
            roots.push(z);
        }
    }

    // Real polynomials have conjugate-symmetric roots; snap tiny imaginary
    // parts so real roots compare cleanly.
    for z in roots.iter_mut() {
        if z.im.abs() <= 1e-12 * z.re.abs().max(1.0) {
            z.im = 0.0;
        }
    }
    sort_roots(&mut roots);
    Ok(roots)
}
