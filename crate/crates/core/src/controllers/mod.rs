//! Control laws: PID, Mamdani fuzzy and normalized-MIT-rule MRAS.
//!
//! Each law is a pure step function over an explicit state value. The
//! [`Controller`] wrapper pairs a [`ControllerSpec`] with its state so the
//! simulation loop can drive any of them through one interface.

pub mod fuzzy;
pub mod mras;
pub mod pid;
pub mod tuning;

use serde::{Deserialize, Serialize};

pub use fuzzy::{
    fuzzify, fuzzy_infer, fuzzy_step, FuzzyConfig, FuzzyRuleBase, FuzzyState, LinguisticVariable, MembershipFunction,
    Rule,
};
pub use mras::{mras_step, mras_tracking_error, mras_update_rates, MrasConfig, MrasState};
pub use pid::{pid_step, PidGains, PidState};
pub use tuning::{zn_pid_gains, zn_ultimate_gain};

use crate::{Error, Result};

pub(crate) fn check_sign(sign: f64) -> Result<()> {
    if sign == 1.0 || sign == -1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("output_sign must be +1 or -1, got {sign}")))
    }
}

fn positive() -> f64 {
    1.0
}

/// PID gains plus the loop-sign flag. Serialized flat, with the gain
/// fields and `output_sign` side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PidSpecRepr", into = "PidSpecRepr")]
pub struct PidSpec {
    pub gains: PidGains,
    pub output_sign: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PidSpecRepr {
    #[serde(default)]
    kp: f64,
    #[serde(default)]
    ki: f64,
    #[serde(default)]
    kd: f64,
    #[serde(default = "pid::default_filter")]
    n: f64,
    #[serde(default = "pid::neg_inf")]
    u_min: f64,
    #[serde(default = "pid::pos_inf")]
    u_max: f64,
    #[serde(default = "positive")]
    output_sign: f64,
}

impl From<PidSpecRepr> for PidSpec {
    fn from(r: PidSpecRepr) -> Self {
        PidSpec {
            gains: PidGains {
                kp: r.kp,
                ki: r.ki,
                kd: r.kd,
                n: r.n,
                u_min: r.u_min,
                u_max: r.u_max,
            },
            output_sign: r.output_sign,
        }
    }
}

impl From<PidSpec> for PidSpecRepr {
    fn from(p: PidSpec) -> Self {
        let g = p.gains;
        PidSpecRepr {
            kp: g.kp,
            ki: g.ki,
            kd: g.kd,
            n: g.n,
            u_min: g.u_min,
            u_max: g.u_max,
            output_sign: p.output_sign,
        }
    }
}

/// Serializable description of a controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// No feedback: the plant input is held at `u`.
    OpenLoop {
        #[serde(default)]
        u: f64,
    },
    Pid(PidSpec),
    Fuzzy(FuzzyConfig),
    Mras(MrasConfig),
}

impl ControllerSpec {
    pub fn pid(gains: PidGains, output_sign: f64) -> Self {
        ControllerSpec::Pid(PidSpec { gains, output_sign })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ControllerSpec::OpenLoop { .. } => "open_loop",
            ControllerSpec::Pid(_) => "pid",
            ControllerSpec::Fuzzy(_) => "fuzzy",
            ControllerSpec::Mras(_) => "mras",
        }
    }

    /// Names of the extra channels the controller records.
    pub fn aux_names(&self) -> &'static [&'static str] {
        match self {
            ControllerSpec::Mras(_) => &["ym", "t0", "s0"],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone)]
enum Law {
    OpenLoop(f64),
    Pid(PidSpec, PidState),
    Fuzzy(Box<(FuzzyConfig, FuzzyRuleBase)>, FuzzyState),
    Mras(MrasConfig, MrasState),
}

/// Result of one controller update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    /// Values for [`ControllerSpec::aux_names`], in order; unused slots are 0.
    pub aux: [f64; 3],
}

/// A controller spec bound to its running state.
#[derive(Debug, Clone)]
pub struct Controller {
    law: Law,
    aux_names: &'static [&'static str],
}

impl Controller {
    pub fn new(spec: &ControllerSpec) -> Result<Self> {
        let law = match spec {
            ControllerSpec::OpenLoop { u } => {
                if !u.is_finite() {
                    return Err(Error::invalid("open-loop input must be finite"));
                }
                Law::OpenLoop(*u)
            }
            ControllerSpec::Pid(p) => {
                p.gains.validate()?;
                check_sign(p.output_sign)?;
                Law::Pid(*p, PidState::default())
            }
            ControllerSpec::Fuzzy(cfg) => {
                let rb = cfg.build_rule_base()?;
                Law::Fuzzy(Box::new((cfg.clone(), rb)), FuzzyState::default())
            }
            ControllerSpec::Mras(cfg) => {
                cfg.validate()?;
                Law::Mras(*cfg, MrasState::new(cfg))
            }
        };
        Ok(Controller {
            law,
            aux_names: spec.aux_names(),
        })
    }

    pub fn aux_names(&self) -> &'static [&'static str] {
        self.aux_names
    }

    /// Advances the controller by one sample of reference `r` and measured
    /// output `y`.
    pub fn step(&mut self, r: f64, y: f64, dt: f64) -> Result<ControlOutput> {
        let e = r - y;
        let mut aux = [0.0; 3];
        let u = match &mut self.law {
            Law::OpenLoop(u) => *u,
            Law::Pid(spec, state) => {
                let (u, next) = pid_step(&spec.gains, state, e, dt);
                *state = next;
                spec.output_sign * u
            }
            Law::Fuzzy(cfg, state) => {
                let (cfg, rb) = &**cfg;
                let (u, next) = fuzzy_step(cfg, rb, state, e, dt);
                *state = next;
                u
            }
            Law::Mras(cfg, state) => {
                aux = [state.ym, state.t0, state.s0];
                let (u, next) = mras_step(cfg, state, r, y, dt)?;
                *state = next;
                u
            }
        };
        Ok(ControlOutput { u, aux })
    }
}
