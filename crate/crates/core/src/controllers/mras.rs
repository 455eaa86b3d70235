//! Model reference adaptive control with the normalized MIT rule.
//!
//! Plant model `b / (s + a)`, reference model `bm / (s + am)`, and the
//! two-gain law `u = t0 uc - s0 y`. The adapted loop equals the reference
//! model when `b t0 = bm` and `a + b s0 = am`. The sensitivities are
//! approximated by `de/dt0 ~ ym` and `de/ds0 ~ -b / (s + am) y`.

use serde::{Deserialize, Serialize};

use crate::numcore::{Polynomial, TransferFunction};
use crate::sim::SimTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrasConfig {
    pub a: f64,
    pub b: f64,
    pub am: f64,
    pub bm: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Initial `(t0, s0)`.
    pub theta0: [f64; 2],
    pub output_sign: f64,
}

impl Default for MrasConfig {
    fn default() -> Self {
        MrasConfig {
            a: 0.65,
            b: 1.0,
            am: 2.0,
            bm: 5.0,
            gamma1: 0.5,
            gamma2: 0.5,
            alpha1: 0.1,
            alpha2: 0.1,
            theta0: [0.0, 0.0],
            output_sign: 1.0,
        }
    }
}

impl MrasConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.b,
            self.am,
            self.bm,
            self.gamma1,
            self.gamma2,
            self.alpha1,
            self.alpha2,
            self.theta0[0],
            self.theta0[1],
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("MRAS parameters must be finite"));
        }
        if !(self.am > 0.0) {
            return Err(Error::invalid(format!(
                "MRAS reference pole am must be > 0, got {}",
                self.am
            )));
        }
        if !(self.alpha1 > 0.0 && self.alpha2 > 0.0) {
            return Err(Error::invalid("MRAS normalization offsets alpha1, alpha2 must be > 0"));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(Error::invalid("MRAS adaptation gains must be >= 0"));
        }
        if self.b == 0.0 {
            return Err(Error::invalid("MRAS plant gain b must be nonzero"));
        }
        super::check_sign(self.output_sign)
    }

    /// Gains satisfying the matching conditions: `(bm / b, (am - a) / b)`.
    pub fn matched_gains(&self) -> (f64, f64) {
        (self.bm / self.b, (self.am - self.a) / self.b)
    }

    /// `bm / (s + am)`.
    pub fn reference_model(&self) -> TransferFunction {
        TransferFunction::new(Polynomial::constant(self.bm), Polynomial::new(vec![self.am, 1.0]))
            .expect("nonzero denominator")
    }

    /// Closed loop `b t0 / (s + a + b s0)` for fixed gains.
    pub fn closed_loop(&self, t0: f64, s0: f64) -> TransferFunction {
        TransferFunction::new(
            Polynomial::constant(self.b * t0),
            Polynomial::new(vec![self.a + self.b * s0, 1.0]),
        )
        .expect("nonzero denominator")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrasState {
    pub t0: f64,
    pub s0: f64,
    /// Reference model output.
    pub ym: f64,
    /// Plant output filtered by `b / (s + am)`.
    pub filt_y: f64,
    /// Updates applied so far.
    pub step: usize,
}

impl MrasState {
    pub fn new(cfg: &MrasConfig) -> Self {
        MrasState {
            t0: cfg.theta0[0],
            s0: cfg.theta0[1],
            ym: 0.0,
            filt_y: 0.0,
            step: 0,
        }
    }
}

/// Normalized MIT-rule rates `(dt0/dt, ds0/dt)` for model error `e = y - ym`.
pub fn mras_update_rates(cfg: &MrasConfig, ym: f64, filt_y: f64, e: f64) -> (f64, f64) {
    let dt0 = -cfg.gamma1 * ym * e / (cfg.alpha1 + ym * ym);
    let ds0 = cfg.gamma2 * filt_y * e / (cfg.alpha2 + filt_y * filt_y);
    (dt0, ds0)
}

/// Exact zero-order-hold step of `x' = -pole x + gain input`.
fn first_order_zoh(x: f64, input: f64, pole: f64, gain: f64, dt: f64) -> f64 {
    let decay = (-pole * dt).exp();
    decay * x + gain / pole * (1.0 - decay) * input
}

/// One MRAS update for command `uc` and measured output `y`.
///
/// The control uses the gains current at this sample. The gains then
/// advance by explicit Euler on the normalized MIT rule, and the reference
/// model and sensitivity filter advance by an exact zero-order-hold step.
pub fn mras_step(cfg: &MrasConfig, st: &MrasState, uc: f64, y: f64, dt: f64) -> Result<(f64, MrasState)> {
    let e = y - st.ym;
    let u = st.t0 * uc - st.s0 * y;
    let (dt0, ds0) = mras_update_rates(cfg, st.ym, st.filt_y, e);
    let next = MrasState {
        t0: st.t0 + dt * dt0,
        s0: st.s0 + dt * ds0,
        ym: first_order_zoh(st.ym, uc, cfg.am, cfg.bm, dt),
        filt_y: first_order_zoh(st.filt_y, y, cfg.am, cfg.b, dt),
        step: st.step + 1,
    };
    let finite = [u, next.t0, next.s0, next.ym, next.filt_y]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Divergence { step: st.step });
    }
    Ok((cfg.output_sign * u, next))
}

/// RMS of `y - ym` over the final 20% of the trace.
pub fn mras_tracking_error(trace: &SimTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::domain("tracking error of an empty trace"));
    }
    let ym = trace
        .channel("ym")
        .ok_or_else(|| Error::domain("trace has no `ym` channel"))?;
    let y = &trace.y;
    let n = y.len();
    let start = n - (n / 5).max(1);
    let sq: f64 = y[start..]
        .iter()
        .zip(&ym[start..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / (n - start) as f64).sqrt())
}
