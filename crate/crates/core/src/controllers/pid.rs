use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub(crate) fn default_filter() -> f64 {
    20.0
}

pub(crate) fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

pub(crate) fn pos_inf() -> f64 {
    f64::INFINITY
}

/// Parallel-form PID gains with a filtered derivative `Kd N s / (s + N)`
/// and output saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    #[serde(default)]
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    /// Derivative filter coefficient, rad/s.
    #[serde(default = "default_filter")]
    pub n: f64,
    #[serde(default = "neg_inf")]
    pub u_min: f64,
    #[serde(default = "pos_inf")]
    pub u_max: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 0.0,
            n: default_filter(),
            u_min: neg_inf(),
            u_max: pos_inf(),
        }
    }
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        PidGains {
            kp,
            ki,
            kd,
            ..PidGains::default()
        }
    }

    pub fn with_limits(self, u_min: f64, u_max: f64) -> Self {
        PidGains { u_min, u_max, ..self }
    }

    pub fn with_filter(self, n: f64) -> Self {
        PidGains { n, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("PID gains must be finite"));
        }
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::invalid(format!(
                "PID filter coefficient must be > 0, got {}",
                self.n
            )));
        }
        if !(self.u_min < self.u_max) {
            return Err(Error::invalid(format!(
                "PID saturation requires u_min < u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }
}

/// Integrator, derivative-filter and previous-error memory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub derivative: f64,
    pub prev_error: Option<f64>,
}

/// One controller update.
///
/// The integral advances by the trapezoid rule and the derivative filter
/// by backward Euler. On the first call the previous error is taken equal
/// to the current one, so there is no derivative kick from the initial
/// condition. When the output saturates, the integral is not advanced in
/// the direction that would push further into saturation.
pub fn pid_step(gains: &PidGains, state: &PidState, e: f64, dt: f64) -> (f64, PidState) {
    debug_assert!(dt > 0.0);
    let prev = state.prev_error.unwrap_or(e);
    let proportional = gains.kp * e;
    let integral = state.integral + gains.ki * dt * 0.5 * (e + prev);
    let derivative = (state.derivative + gains.kd * gains.n * (e - prev)) / (1.0 + gains.n * dt);

    let raw = proportional + integral + derivative;
    let u = raw.clamp(gains.u_min, gains.u_max);
    let winding_up =
        (raw > gains.u_max && integral > state.integral) || (raw < gains.u_min && integral < state.integral);

    let next = PidState {
        integral: if winding_up { state.integral } else { integral },
        derivative,
        prev_error: Some(e),
    };
    (u, next)
}
