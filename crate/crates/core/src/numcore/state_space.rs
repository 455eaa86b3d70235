use nalgebra::{DMatrix, DVector};

use super::TransferFunction;
use crate::{Error, Result};

/// Continuous-time realization `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::domain("A must be square"));
        }
        let m = b.ncols();
        let p = c.nrows();
        if b.nrows() != n || c.ncols() != n || d.nrows() != p || d.ncols() != m {
            return Err(Error::domain(format!(
                "non-conformable realization: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Number of states.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `A x + B u` for a single-input system.
    pub fn derivative(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + self.b.column(0) * u
    }

    /// First output channel `C x + D u`.
    pub fn output(&self, x: &DVector<f64>, u: f64) -> f64 {
        let cx = if self.order() == 0 {
            0.0
        } else {
            (self.c.row(0) * x)[(0, 0)]
        };
        cx + self.d[(0, 0)] * u
    }
}

/// Controllable-canonical realization of a proper SISO transfer function.
///
/// With the denominator normalized to `s^n + a_{n-1} s^{n-1} + ... + a_0`
/// the state matrix is the companion form with `-a_k` in the last row,
/// `B = e_n`, and the strictly proper part of the numerator in `C`.
pub fn tf_to_statespace(g: &TransferFunction) -> Result<StateSpace> {
    if !g.is_proper() {
        return Err(Error::domain(
            "improper transfer function has no state-space realization",
        ));
    }
    let den = g.den();
    let n = den.degree();
    let lead = den.leading();
    let a_coef: Vec<f64> = (0..n).map(|k| den.coeff(k) / lead).collect();
    let b_coef: Vec<f64> = (0..=n).map(|k| g.num().coeff(k) / lead).collect();
    let feedthrough = b_coef[n];

    let a = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == n {
            -a_coef[j]
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let b = DMatrix::from_fn(n, 1, |i, _| if i + 1 == n { 1.0 } else { 0.0 });
    let c = DMatrix::from_fn(1, n, |_, j| b_coef[j] - feedthrough * a_coef[j]);
    let d = DMatrix::from_element(1, 1, feedthrough);
    StateSpace::new(a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_plant_realization() {
        let g = TransferFunction::from_descending(&[1.0], &[1.0, 0.65]).unwrap();
        let ss = tf_to_statespace(&g).unwrap();
        assert_eq!(ss.a()[(0, 0)], -0.65);
        assert_eq!(ss.b()[(0, 0)], 1.0);
        assert_eq!(ss.c()[(0, 0)], 1.0);
        assert_eq!(ss.d()[(0, 0)], 0.0);
    }

    #[test]
    fn reference_model_realization() {
        let g = TransferFunction::from_descending(&[5.0], &[1.0, 2.0]).unwrap();
        let ss = tf_to_statespace(&g).unwrap();
        assert_eq!(ss.a()[(0, 0)], -2.0);
        assert_eq!(ss.b()[(0, 0)], 1.0);
        assert_eq!(ss.c()[(0, 0)], 5.0);
        assert_eq!(ss.d()[(0, 0)], 0.0);
    }

    #[test]
    fn static_gain_has_empty_state() {
        let g = TransferFunction::from_descending(&[3.0], &[1.0]).unwrap();
        let ss = tf_to_statespace(&g).unwrap();
        assert_eq!(ss.order(), 0);
        assert_eq!(ss.d()[(0, 0)], 3.0);
        assert_eq!(ss.output(&DVector::zeros(0), 2.0), 6.0);
    }

    #[test]
    fn improper_rejected() {
        let g = TransferFunction::from_descending(&[1.0, 0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(tf_to_statespace(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn non_monic_denominator_is_normalized() {
        // 4 / (2s + 4) == 2 / (s + 2)
        let g = TransferFunction::from_descending(&[4.0], &[2.0, 4.0]).unwrap();
        let ss = tf_to_statespace(&g).unwrap();
        assert_eq!(ss.a()[(0, 0)], -2.0);
        assert_eq!(ss.c()[(0, 0)], 2.0);
    }

    #[test]
    fn nonconformable_rejected() {
        let r = StateSpace::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(r.is_err());
    }
}
