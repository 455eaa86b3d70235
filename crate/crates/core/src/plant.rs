//! Nonlinear EMS maglev plant: vertical dynamics of the suspended mass, the
//! coil circuit, the gap sensor, and the small-signal model at equilibrium.
//!
//! The gap `z` is measured downward from the magnet face. The magnet pulls
//! the vehicle up with `f = C (i / z)^2`, which follows from the inductance
//! model `L(z) = L1 + 2C / z` through `f = -(i^2 / 2) dL/dz`.

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::numcore::{Polynomial, StateSpace, TransferFunction};
use crate::{Error, Result};

/// Physical constants of the levitation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaglevParams {
    /// Suspended mass, kg.
    pub m: f64,
    /// Gravitational acceleration, m/s^2.
    pub g: f64,
    /// Coil resistance, ohm.
    pub r: f64,
    /// Constant (leakage) inductance, H.
    pub l1: f64,
    /// Force constant, N m^2 / A^2.
    pub c: f64,
    /// Gap sensor gain, V/m.
    pub beta: f64,
    /// Nominal air gap, m.
    pub z0: f64,
    /// Include the motional EMF term `(dL/dz) zdot i` in the coil equation.
    pub motional_emf: bool,
}

impl Default for MaglevParams {
    /// The parameter set whose linearization is
    /// `G(s) = -280 / ((s + 29)(s + 56)(s - 56))`.
    fn default() -> Self {
        MaglevParams::from_linear_targets(1.0, 9.81, 29.0, 1.0, 100.0, 56.0, 280.0)
    }
}

impl MaglevParams {
    /// Back-solves `z0` and `C` so that the linearization at `z0` has the
    /// unstable pole `+unstable_pole` and numerator magnitude `gain`
    /// (`Ki beta / (L1 m)`), given the remaining constants.
    ///
    /// `Kz / m = 2g / z0` fixes the gap; `Ki = 2 sqrt(C m g) / z0` then
    /// fixes `C`.
    pub fn from_linear_targets(m: f64, g: f64, r: f64, l1: f64, beta: f64, unstable_pole: f64, gain: f64) -> Self {
        let z0 = 2.0 * g / (unstable_pole * unstable_pole);
        let ki = gain * l1 * m / beta;
        let c = ki * ki * z0 * z0 / (4.0 * m * g);
        MaglevParams {
            m,
            g,
            r,
            l1,
            c,
            beta,
            z0,
            motional_emf: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m", self.m),
            ("g", self.g),
            ("r", self.r),
            ("l1", self.l1),
            ("c", self.c),
            ("beta", self.beta),
            ("z0", self.z0),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "plant parameter `{name}` must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Gap-dependent coil inductance `L1 + 2C / z`.
    pub fn inductance(&self, z: f64) -> f64 {
        self.l1 + 2.0 * self.c / z
    }

    /// Sets a field by name; used by parameter drift schedules.
    pub fn set_field(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "m" => &mut self.m,
            "g" => &mut self.g,
            "r" => &mut self.r,
            "l1" => &mut self.l1,
            "c" => &mut self.c,
            "beta" => &mut self.beta,
            "z0" => &mut self.z0,
            other => {
                return Err(Error::invalid(format!("unknown plant parameter `{other}`")));
            }
        };
        *slot = value;
        Ok(())
    }
}

/// `(gap, gap rate, current)` of the nonlinear plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaglevState {
    pub z: f64,
    pub zdot: f64,
    pub i: f64,
}

impl MaglevState {
    pub fn to_array(self) -> [f64; 3] {
        [self.z, self.zdot, self.i]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        MaglevState {
            z: x[0],
            zdot: x[1],
            i: x[2],
        }
    }
}

/// Time derivative of [`MaglevState`], in the same field order.
pub type MaglevDerivative = MaglevState;

/// Small-signal force sensitivities at an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedGains {
    /// `df/di`, N/A.
    pub ki: f64,
    /// `-df/dz`, N/m.
    pub kz: f64,
}

fn check_gap(z: f64) -> Result<()> {
    if z > 0.0 {
        Ok(())
    } else {
        Err(Error::GapCollapse { z })
    }
}

/// Attractive magnet force `C (i / z)^2`, N.
pub fn magnetic_force(i: f64, z: f64, p: &MaglevParams) -> Result<f64> {
    check_gap(z)?;
    let ratio = i / z;
    Ok(p.c * ratio * ratio)
}

/// Current that balances gravity at gap `z_eq`: `z_eq sqrt(m g / C)`.
pub fn equilibrium_current(p: &MaglevParams, z_eq: f64) -> Result<f64> {
    if !(z_eq > 0.0) {
        return Err(Error::domain(format!("equilibrium gap must be > 0, got {z_eq}")));
    }
    Ok(z_eq * (p.m * p.g / p.c).sqrt())
}

/// Resting state at gap `z_eq`.
pub fn equilibrium_state(p: &MaglevParams, z_eq: f64) -> Result<MaglevState> {
    Ok(MaglevState {
        z: z_eq,
        zdot: 0.0,
        i: equilibrium_current(p, z_eq)?,
    })
}

/// Coil voltage that holds the equilibrium current.
pub fn equilibrium_voltage(p: &MaglevParams, z_eq: f64) -> Result<f64> {
    Ok(p.r * equilibrium_current(p, z_eq)?)
}

/// Right-hand side of the plant ODEs for coil voltage `v`.
///
/// The coil equation is `V = R i + L(z) di/dt`, optionally extended by the
/// motional term `(dL/dz) zdot i` when `p.motional_emf` is set.
pub fn maglev_derivatives(x: &MaglevState, v: f64, p: &MaglevParams) -> Result<MaglevDerivative> {
    let force = magnetic_force(x.i, x.z, p)?;
    let zddot = p.g - force / p.m;
    let mut emf = v - p.r * x.i;
    if p.motional_emf {
        let dl_dz = -2.0 * p.c / (x.z * x.z);
        emf -= dl_dz * x.zdot * x.i;
    }
    Ok(MaglevDerivative {
        z: x.zdot,
        zdot: zddot,
        i: emf / p.inductance(x.z),
    })
}

/// Same dynamics as [`maglev_derivatives`], with the magnet force written
/// relative to the equilibrium at `z_ref`: `f / m = g (i / i_ref)^2 (z_ref / z)^2`.
///
/// At `(z_ref, i_ref)` with `v = R i_ref` every derivative is exactly zero
/// in floating point, which keeps the unstable open-loop equilibrium at rest.
pub fn maglev_derivatives_about(x: &MaglevState, v: f64, p: &MaglevParams, z_ref: f64) -> Result<MaglevDerivative> {
    check_gap(x.z)?;
    let i_ref = equilibrium_current(p, z_ref)?;
    let current = x.i / i_ref;
    let gap = z_ref / x.z;
    let mut d = maglev_derivatives(x, v, p)?;
    d.zdot = p.g * (1.0 - current * current * gap * gap);
    Ok(d)
}

/// Force sensitivities and the voltage-to-sensor transfer function
/// `-Ki beta / ((R + s L1)(m s^2 - Kz))` at gap `z_eq`.
pub fn linearize(p: &MaglevParams, z_eq: f64) -> Result<(LinearizedGains, TransferFunction)> {
    let i_eq = equilibrium_current(p, z_eq)?;
    let ki = 2.0 * p.c * i_eq / (z_eq * z_eq);
    let kz = 2.0 * p.c * i_eq * i_eq / (z_eq * z_eq * z_eq);
    let electrical = Polynomial::new(vec![p.r, p.l1]);
    let mechanical = Polynomial::new(vec![-kz, 0.0, p.m]);
    let g = TransferFunction::new(Polynomial::constant(-ki * p.beta), &electrical * &mechanical)?;
    Ok((LinearizedGains { ki, kz }, g))
}

/// Small-signal model at gap `z_eq` in physical coordinates
/// `(dz, dzdot, di)`, with coil-voltage deviation as input and sensor
/// voltage deviation as output. Same transfer function as [`linearize`].
pub fn linearized_state_space(p: &MaglevParams, z_eq: f64) -> Result<StateSpace> {
    let (gains, _) = linearize(p, z_eq)?;
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            1.0,
            0.0,
            gains.kz / p.m,
            0.0,
            -gains.ki / p.m,
            0.0,
            0.0,
            -p.r / p.l1,
        ],
    );
    let b = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0 / p.l1]);
    let c = DMatrix::from_row_slice(1, 3, &[p.beta, 0.0, 0.0]);
    StateSpace::new(a, b, c, DMatrix::zeros(1, 1))
}

/// Gap sensor voltage `beta z`.
pub fn sensor_output(z: f64, beta: f64) -> f64 {
    beta * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn unit_mass_params() -> MaglevParams {
        MaglevParams {
            m: 1.0,
            g: 9.81,
            c: 0.035316,
            z0: 0.06,
            ..MaglevParams::default()
        }
    }

    #[test]
    fn zero_current_zero_force() {
        assert_eq!(magnetic_force(0.0, 0.06, &unit_mass_params()).unwrap(), 0.0);
    }

    #[test]
    fn force_balances_unit_mass_at_one_amp() {
        // C = m g z^2 / i^2 = 9.81 * 0.0036
        let f = magnetic_force(1.0, 0.06, &unit_mass_params()).unwrap();
        assert_relative_eq!(f, 9.81, max_relative = 1e-12);
    }

    #[test]
    fn force_is_quadratic_in_current() {
        let p = unit_mass_params();
        let ratio = magnetic_force(2.0, 0.05, &p).unwrap() / magnetic_force(1.0, 0.05, &p).unwrap();
        assert_relative_eq!(ratio, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn nonpositive_gap_collapses() {
        let p = unit_mass_params();
        assert!(matches!(magnetic_force(1.0, 0.0, &p), Err(Error::GapCollapse { .. })));
        assert!(matches!(magnetic_force(1.0, -0.01, &p), Err(Error::GapCollapse { .. })));
        let x = MaglevState {
            z: 0.0,
            zdot: 0.0,
            i: 1.0,
        };
        assert!(maglev_derivatives(&x, 0.0, &p).is_err());
    }

    #[test]
    fn equilibrium_current_examples() {
        let p = unit_mass_params();
        let i = equilibrium_current(&p, 0.06).unwrap();
        assert_relative_eq!(i, 1.0, max_relative = 1e-12);

        let doubled = equilibrium_current(&p, 0.12).unwrap();
        assert_relative_eq!(doubled, 2.0 * i, max_relative = 1e-12);

        let q = MaglevParams { c: 4.0 * p.c, ..p };
        assert_relative_eq!(equilibrium_current(&q, 0.06).unwrap(), 0.5 * i, max_relative = 1e-12);

        assert!(equilibrium_current(&p, 0.0).is_err());
        assert!(equilibrium_current(&p, -1.0).is_err());
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = MaglevParams::default();
        let x = equilibrium_state(&p, p.z0).unwrap();
        let v = equilibrium_voltage(&p, p.z0).unwrap();
        let d = maglev_derivatives(&x, v, &p).unwrap();
        assert_abs_diff_eq!(d.z, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.zdot, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.i, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn no_current_is_free_fall() {
        let p = MaglevParams::default();
        let x = MaglevState {
            z: p.z0,
            zdot: 0.0,
            i: 0.0,
        };
        let d = maglev_derivatives(&x, 0.0, &p).unwrap();
        assert_eq!(d.zdot, p.g);
    }

    #[test]
    fn voltage_step_raises_current() {
        let p = MaglevParams::default();
        let x = equilibrium_state(&p, p.z0).unwrap();
        let v = equilibrium_voltage(&p, p.z0).unwrap() * 1.01;
        assert!(maglev_derivatives(&x, v, &p).unwrap().i > 0.0);
    }

    #[test]
    fn motional_emf_only_acts_when_moving() {
        let p = MaglevParams {
            motional_emf: true,
            ..MaglevParams::default()
        };
        let mut x = equilibrium_state(&p, p.z0).unwrap();
        let v = equilibrium_voltage(&p, p.z0).unwrap();
        assert_abs_diff_eq!(maglev_derivatives(&x, v, &p).unwrap().i, 0.0, epsilon = 1e-12);
        // Gap opening lowers inductance, which induces current growth.
        x.zdot = 0.01;
        assert!(maglev_derivatives(&x, v, &p).unwrap().i > 0.0);
    }

    #[test]
    fn default_params_reproduce_reference_transfer_function() {
        let p = MaglevParams::default();
        let (gains, g) = linearize(&p, p.z0).unwrap();
        assert_relative_eq!(gains.kz, 3136.0, max_relative = 1e-12);
        assert_relative_eq!(gains.ki * p.beta, 280.0, max_relative = 1e-12);
        let want = Polynomial::from_roots(&[-29.0, -56.0, 56.0]);
        for k in 0..4 {
            assert_abs_diff_eq!(g.den().coeff(k), want.coeff(k), epsilon = 1e-8);
        }
        assert_relative_eq!(g.num().coeff(0), -280.0, max_relative = 1e-12);
        let poles = g.poles();
        for (z, want) in poles.iter().zip([-56.0, -29.0, 56.0]) {
            assert_abs_diff_eq!(z.re, want, epsilon = 1e-6);
            assert_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn sensor_gain_scales_numerator_only() {
        let p = MaglevParams::default();
        let q = MaglevParams {
            beta: 2.0 * p.beta,
            ..p
        };
        let (_, g1) = linearize(&p, p.z0).unwrap();
        let (_, g2) = linearize(&q, q.z0).unwrap();
        assert_relative_eq!(g2.num().coeff(0), 2.0 * g1.num().coeff(0), max_relative = 1e-14);
        assert_eq!(g1.den(), g2.den());
    }

    #[test]
    fn sensor_output_examples() {
        assert_relative_eq!(sensor_output(0.06, 100.0), 6.0, max_relative = 1e-15);
        assert_eq!(sensor_output(0.0, 100.0), 0.0);
        assert_eq!(sensor_output(0.0123, 1.0), 0.0123);
    }

    #[test]
    fn validate_and_set_field() {
        let mut p = MaglevParams::default();
        p.validate().unwrap();
        p.set_field("z0", 0.061).unwrap();
        assert_eq!(p.z0, 0.061);
        assert!(p.set_field("gap", 1.0).is_err());
        p.set_field("r", -1.0).unwrap();
        assert!(p.validate().is_err());
    }

    fn arb_params() -> impl Strategy<Value = MaglevParams> {
        (
            0.1..100.0f64,
            1.0..20.0f64,
            0.5..50.0f64,
            0.01..2.0f64,
            1e-6..1e-1f64,
            1.0..500.0f64,
            1e-3..0.1f64,
        )
            .prop_map(|(m, g, r, l1, c, beta, z0)| MaglevParams {
                m,
                g,
                r,
                l1,
                c,
                beta,
                z0,
                motional_emf: false,
            })
    }

    #[test]
    fn equilibrium_is_an_exact_fixed_point_in_relative_form() {
        let p = MaglevParams::default();
        let x = equilibrium_state(&p, p.z0).unwrap();
        let d = maglev_derivatives_about(&x, equilibrium_voltage(&p, p.z0).unwrap(), &p, p.z0).unwrap();
        assert_eq!(d.to_array(), [0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn linear_gains_match_finite_differences(p in arb_params()) {
            let z = p.z0;
            let i = equilibrium_current(&p, z).unwrap();
            let (gains, _) = linearize(&p, z).unwrap();
            let h = 1e-6;
            let hi = h * i.max(1.0);
            let hz = h * z;
            let dfdi = (magnetic_force(i + hi, z, &p).unwrap() - magnetic_force(i - hi, z, &p).unwrap()) / (2.0 * hi);
            let dfdz = (magnetic_force(i, z + hz, &p).unwrap() - magnetic_force(i, z - hz, &p).unwrap()) / (2.0 * hz);
            prop_assert!(((dfdi - gains.ki) / gains.ki).abs() < 1e-6);
            prop_assert!(((-dfdz - gains.kz) / gains.kz).abs() < 1e-6);
        }

        #[test]
        fn relative_force_form_agrees(p in arb_params(), sz in 0.5..1.5f64, si in 0.5..1.5f64, zdot in -1.0..1.0f64, v in -50.0..50.0f64) {
            let i_eq = equilibrium_current(&p, p.z0).unwrap();
            let x = MaglevState { z: sz * p.z0, zdot, i: si * i_eq };
            let a = maglev_derivatives(&x, v, &p).unwrap();
            let b = maglev_derivatives_about(&x, v, &p, p.z0).unwrap();
            let scale = p.g * (1.0 + (si / sz).powi(2));
            prop_assert!((a.zdot - b.zdot).abs() <= 1e-12 * scale);
            prop_assert_eq!((a.z, a.i), (b.z, b.i));
        }

        #[test]
        fn exactly_one_unstable_pole(p in arb_params()) {
            let (gains, g) = linearize(&p, p.z0).unwrap();
            let poles = g.poles();
            let unstable: Vec<_> = poles.iter().filter(|z| z.re > 0.0).collect();
            prop_assert_eq!(unstable.len(), 1);
            let omega = (gains.kz / p.m).sqrt();
            prop_assert!((unstable[0].re - omega).abs() <= 1e-8 * omega);
        }

        #[test]
        fn force_monotone_in_current_and_gap(p in arb_params(), i in 0.01..50.0f64, z in 1e-3..0.2f64, di in 1e-3..1.0f64, dz in 1e-4..0.05f64) {
            let f = magnetic_force(i, z, &p).unwrap();
            prop_assert!(magnetic_force(i + di, z, &p).unwrap() > f);
            prop_assert!(magnetic_force(i, z + dz, &p).unwrap() < f);
        }

        #[test]
        fn equilibrium_balances_weight(p in arb_params()) {
            let i = equilibrium_current(&p, p.z0).unwrap();
            let f = magnetic_force(i, p.z0, &p).unwrap();
            prop_assert!(((f - p.m * p.g) / (p.m * p.g)).abs() < 1e-12);
        }
    }
}
