//! Fixed-step closed-loop simulation: reference, controller, plant, sensor.
//!
//! Every sample `k` reads the plant output `y[k]`, evaluates the reference,
//! lets the controller compute `u[k]` from them, records all channels, and
//! then advances the plant over `[t[k], t[k+1]]` with `u[k]` held constant
//! by one classical RK4 step.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::controllers::{Controller, ControllerSpec};
use crate::numcore::{tf_to_statespace, StateSpace, TransferFunction};
use crate::plant::{self, MaglevParams, MaglevState};
use crate::{Error, Result};

/// Classical fourth-order Runge-Kutta step of `x' = f(x, u)` with `u` held.
///
/// Any non-finite stage reports [`Error::Divergence`] with step 0; callers
/// that track a step index re-tag it.
pub fn rk4_step<F>(f: F, x: &DVector<f64>, u: f64, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>, f64) -> Result<DVector<f64>>,
{
    let finite = |v: DVector<f64>| {
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Divergence { step: 0 })
        }
    };
    let k1 = finite(f(x, u)?)?;
    let k2 = finite(f(&(x + &k1 * (0.5 * dt)), u)?)?;
    let k3 = finite(f(&(x + &k2 * (0.5 * dt)), u)?)?;
    let k4 = finite(f(&(x + &k3 * dt), u)?)?;
    finite(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

fn default_limit_gap() -> f64 {
    0.0
}

/// Which plant the loop closes around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// Full nonlinear EMS dynamics. The plant input is the coil-voltage
    /// deviation from the equilibrium voltage at `params.z0`; the output is
    /// the absolute sensor voltage `beta z`.
    Nonlinear {
        #[serde(default)]
        params: MaglevParams,
        /// Initial gap minus `z0`, m.
        #[serde(default)]
        initial_gap_offset: f64,
        /// The run fails once the gap drops to this value, m.
        #[serde(default = "default_limit_gap")]
        min_gap: f64,
    },
    /// Small-signal model at `params.z0`; input and output are deviations.
    Linearized {
        #[serde(default)]
        params: MaglevParams,
        #[serde(default)]
        initial_gap_offset: f64,
    },
    /// Arbitrary proper transfer function, coefficients in descending powers.
    TransferFunction { num: Vec<f64>, den: Vec<f64> },
    /// `b / (s + a)`, the surrogate plant the MRAS design is derived for.
    FirstOrder {
        #[serde(default = "surrogate_a")]
        a: f64,
        #[serde(default = "surrogate_b")]
        b: f64,
    },
}

fn surrogate_a() -> f64 {
    0.65
}

fn surrogate_b() -> f64 {
    1.0
}

impl PlantSpec {
    pub fn nonlinear(params: MaglevParams) -> Self {
        PlantSpec::Nonlinear {
            params,
            initial_gap_offset: 0.0,
            min_gap: 0.0,
        }
    }

    pub fn linearized(params: MaglevParams) -> Self {
        PlantSpec::Linearized {
            params,
            initial_gap_offset: 0.0,
        }
    }

    pub fn first_order(a: f64, b: f64) -> Self {
        PlantSpec::FirstOrder { a, b }
    }

    pub fn maglev_params(&self) -> Option<&MaglevParams> {
        match self {
            PlantSpec::Nonlinear { params, .. } | PlantSpec::Linearized { params, .. } => Some(params),
            _ => None,
        }
    }

    pub fn maglev_params_mut(&mut self) -> Option<&mut MaglevParams> {
        match self {
            PlantSpec::Nonlinear { params, .. } | PlantSpec::Linearized { params, .. } => Some(params),
            _ => None,
        }
    }

    /// Linear model of the plant from plant input to measured output. The
    /// nonlinear plant reports its linearization at `z0`.
    pub fn transfer_function(&self) -> Result<TransferFunction> {
        match self {
            PlantSpec::Nonlinear { params, .. } | PlantSpec::Linearized { params, .. } => {
                params.validate()?;
                Ok(plant::linearize(params, params.z0)?.1)
            }
            PlantSpec::TransferFunction { num, den } => TransferFunction::from_descending(num, den),
            PlantSpec::FirstOrder { a, b } => TransferFunction::from_descending(&[*b], &[1.0, *a]),
        }
    }

    /// Output of the plant at rest, used as the default reference level.
    pub fn nominal_output(&self) -> f64 {
        match self {
            PlantSpec::Nonlinear { params, .. } => plant::sensor_output(params.z0, params.beta),
            _ => 0.0,
        }
    }
}

/// Reference (command) signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// `initial` before `time`, `initial + amplitude` from `time` on.
    /// `initial` defaults to the plant's nominal output.
    Step {
        #[serde(default)]
        initial: Option<f64>,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        time: f64,
    },
    /// `offset + amplitude` for the first half of each period, `offset -
    /// amplitude` for the second.
    Square {
        #[serde(default = "unit")]
        amplitude: f64,
        period: f64,
        #[serde(default)]
        offset: f64,
    },
    Constant {
        #[serde(default)]
        value: Option<f64>,
    },
}

fn unit() -> f64 {
    1.0
}

impl Reference {
    pub fn step(amplitude: f64) -> Self {
        Reference::Step {
            initial: None,
            amplitude,
            time: 0.0,
        }
    }

    pub fn square(amplitude: f64, period: f64) -> Self {
        Reference::Square {
            amplitude,
            period,
            offset: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Reference::Step {
                initial,
                amplitude,
                time,
            } => amplitude.is_finite() && time.is_finite() && initial.is_none_or(f64::is_finite),
            Reference::Square {
                amplitude,
                period,
                offset,
            } => amplitude.is_finite() && offset.is_finite() && period > 0.0 && period.is_finite(),
            Reference::Constant { value } => value.is_none_or(f64::is_finite),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed reference {self:?}")))
        }
    }

    /// Reference value at time `t` given the plant's nominal output.
    pub fn sample(&self, t: f64, nominal: f64) -> f64 {
        match *self {
            Reference::Step {
                initial,
                amplitude,
                time,
            } => {
                let base = initial.unwrap_or(nominal);
                if t >= time {
                    base + amplitude
                } else {
                    base
                }
            }
            Reference::Square {
                amplitude,
                period,
                offset,
            } => {
                if t.rem_euclid(period) < 0.5 * period {
                    offset + amplitude
                } else {
                    offset - amplitude
                }
            }
            Reference::Constant { value } => value.unwrap_or(nominal),
        }
    }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    10.0
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub reference: Reference,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
}

impl Scenario {
    pub fn new(plant: PlantSpec, controller: ControllerSpec, reference: Reference) -> Self {
        Scenario {
            plant,
            controller,
            reference,
            dt: default_dt(),
            horizon: default_horizon(),
        }
    }

    pub fn with_timing(self, dt: f64, horizon: f64) -> Self {
        Scenario { dt, horizon, ..self }
    }

    /// Number of recorded samples, `horizon / dt + 1`.
    pub fn samples(&self) -> usize {
        (self.horizon / self.dt).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid(format!(
                "horizon must be >= dt, got {} (dt {})",
                self.horizon, self.dt
            )));
        }
        self.reference.validate()?;
        Controller::new(&self.controller)?;
        PlantModel::new(&self.plant)?;
        Ok(())
    }
}

/// Uniformly sampled record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    aux_names: Vec<String>,
    aux: Vec<Vec<f64>>,
}

pub const CSV_BASE_COLUMNS: [&str; 5] = ["t", "r", "e", "u", "y"];

impl SimTrace {
    pub fn new(dt: f64, aux_names: Vec<String>) -> Self {
        let aux = vec![Vec::new(); aux_names.len()];
        SimTrace {
            dt,
            t: Vec::new(),
            r: Vec::new(),
            e: Vec::new(),
            u: Vec::new(),
            y: Vec::new(),
            aux_names,
            aux,
        }
    }

    /// Appends one sample; the error channel is computed as `r - y`.
    pub fn push(&mut self, t: f64, r: f64, u: f64, y: f64, aux: &[f64]) {
        debug_assert_eq!(aux.len(), self.aux_names.len());
        self.t.push(t);
        self.r.push(r);
        self.e.push(r - y);
        self.u.push(u);
        self.y.push(y);
        for (col, &v) in self.aux.iter_mut().zip(aux) {
            col.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn aux_names(&self) -> &[String] {
        &self.aux_names
    }

    /// Any channel by name: `t`, `r`, `e`, `u`, `y` or an auxiliary one.
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        match name {
            "t" => Some(&self.t),
            "r" => Some(&self.r),
            "e" => Some(&self.e),
            "u" => Some(&self.u),
            "y" => Some(&self.y),
            _ => self
                .aux_names
                .iter()
                .position(|n| n == name)
                .map(|k| self.aux[k].as_slice()),
        }
    }

    /// CSV with header `t,r,e,u,y[,aux...]`, shortest round-trip decimal
    /// formatting, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        let header: Vec<&str> = CSV_BASE_COLUMNS
            .iter()
            .copied()
            .chain(self.aux_names.iter().map(String::as_str))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                self.t[k], self.r[k], self.e[k], self.u[k], self.y[k]
            );
            for col in &self.aux {
                let _ = write!(out, ",{}", col[k]);
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`SimTrace::to_csv`]. The sample period
    /// is recovered from the first two time stamps.
    pub fn from_csv(text: &str) -> Result<SimTrace> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::domain("empty CSV"))?
            .split(',')
            .collect();
        if header.len() < 5 || header[..5] != CSV_BASE_COLUMNS {
            return Err(Error::domain(format!("unexpected CSV header {header:?}")));
        }
        let aux_names = header[5..].iter().map(|s| s.to_string()).collect();
        let mut trace = SimTrace::new(0.0, aux_names);
        for (n, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::domain(format!("CSV row {}: {e}", n + 2)))?;
            if row.len() != header.len() {
                return Err(Error::domain(format!("CSV row {} has {} fields", n + 2, row.len())));
            }
            trace.t.push(row[0]);
            trace.r.push(row[1]);
            trace.e.push(row[2]);
            trace.u.push(row[3]);
            trace.y.push(row[4]);
            for (col, v) in trace.aux.iter_mut().zip(&row[5..]) {
                col.push(*v);
            }
        }
        if trace.len() >= 2 {
            trace.dt = trace.t[1] - trace.t[0];
        }
        Ok(trace)
    }
}

/// Why and when a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub cause: Error,
    /// Time at which the invalid state was reached, s.
    pub time: f64,
    /// Samples recorded before the failure.
    pub partial: SimTrace,
}

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(Error),
    #[error("run failed at t = {}: {}", .0.time, .0.cause)]
    RunFailed(Box<RunFailure>),
}

/// Plant bound to a concrete realization.
#[derive(Debug, Clone)]
enum PlantModel {
    Nonlinear {
        params: MaglevParams,
        v_bias: f64,
        min_gap: f64,
    },
    Linear {
        ss: StateSpace,
        /// `(z0, beta)` for maglev models, to report the absolute gap.
        gap: Option<(f64, f64)>,
    },
}

impl PlantModel {
    fn new(spec: &PlantSpec) -> Result<(PlantModel, DVector<f64>)> {
        match spec {
            PlantSpec::Nonlinear {
                params,
                initial_gap_offset,
                min_gap,
            } => {
                params.validate()?;
                if !(min_gap.is_finite() && *min_gap >= 0.0 && *min_gap < params.z0) {
                    return Err(Error::invalid(format!("min_gap must lie in [0, z0), got {min_gap}")));
                }
                let mut x0 = plant::equilibrium_state(params, params.z0)?;
                x0.z += initial_gap_offset;
                if !(x0.z > *min_gap) {
                    return Err(Error::invalid("initial gap is at or below min_gap"));
                }
                let model = PlantModel::Nonlinear {
                    params: *params,
                    v_bias: plant::equilibrium_voltage(params, params.z0)?,
                    min_gap: *min_gap,
                };
                Ok((model, DVector::from_row_slice(&x0.to_array())))
            }
            PlantSpec::Linearized {
                params,
                initial_gap_offset,
            } => {
                params.validate()?;
                let ss = plant::linearized_state_space(params, params.z0)?;
                let x0 = DVector::from_row_slice(&[*initial_gap_offset, 0.0, 0.0]);
                Ok((
                    PlantModel::Linear {
                        ss,
                        gap: Some((params.z0, params.beta)),
                    },
                    x0,
                ))
            }
            PlantSpec::TransferFunction { .. } | PlantSpec::FirstOrder { .. } => {
                if let PlantSpec::FirstOrder { a, b } = spec {
                    if !(a.is_finite() && b.is_finite()) {
                        return Err(Error::invalid("first-order plant coefficients must be finite"));
                    }
                }
                let g = spec.transfer_function()?;
                if g.num().coeffs().iter().chain(g.den().coeffs()).any(|c| !c.is_finite()) {
                    return Err(Error::invalid("transfer function coefficients must be finite"));
                }
                let ss = tf_to_statespace(&g).map_err(|e| Error::invalid(e.to_string()))?;
                let n = ss.order();
                Ok((PlantModel::Linear { ss, gap: None }, DVector::zeros(n)))
            }
        }
    }

    fn derivative(&self, x: &DVector<f64>, u: f64) -> Result<DVector<f64>> {
        match self {
            PlantModel::Nonlinear { params, v_bias, .. } => {
                let d = plant::maglev_derivatives_about(
                    &MaglevState::from_slice(x.as_slice()),
                    v_bias + u,
                    params,
                    params.z0,
                )?;
                Ok(DVector::from_row_slice(&d.to_array()))
            }
            PlantModel::Linear { ss, .. } => Ok(ss.derivative(x, u)),
        }
    }

    /// Measured output; `u_held` feeds the direct term of proper models.
    fn output(&self, x: &DVector<f64>, u_held: f64) -> f64 {
        match self {
            PlantModel::Nonlinear { params, .. } => plant::sensor_output(x[0], params.beta),
            PlantModel::Linear { ss, .. } => ss.output(x, u_held),
        }
    }

    fn aux_names(&self) -> &'static [&'static str] {
        match self {
            PlantModel::Nonlinear { .. } => &["z", "i"],
            PlantModel::Linear { gap: Some(_), .. } => &["z"],
            PlantModel::Linear { gap: None, .. } => &[],
        }
    }

    fn aux(&self, x: &DVector<f64>, out: &mut Vec<f64>) {
        match self {
            PlantModel::Nonlinear { .. } => {
                out.push(x[0]);
                out.push(x[2]);
            }
            PlantModel::Linear { gap: Some((z0, _)), .. } => out.push(z0 + x[0]),
            PlantModel::Linear { gap: None, .. } => {}
        }
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if let PlantModel::Nonlinear { min_gap, .. } = self {
            if !(x[0] > *min_gap) {
                return Err(Error::GapCollapse { z: x[0] });
            }
        }
        Ok(())
    }
}

/// Runs a scenario to its horizon.
///
/// Identical scenarios give bit-identical traces. A gap collapse or a
/// non-finite state stops the run and returns the samples recorded so far.
pub fn simulate(s: &Scenario) -> std::result::Result<SimTrace, SimError> {
    s.validate().map_err(SimError::InvalidScenario)?;
    let (model, mut x) = PlantModel::new(&s.plant).map_err(SimError::InvalidScenario)?;
    let mut controller = Controller::new(&s.controller).map_err(SimError::InvalidScenario)?;

    let ctrl_aux = controller.aux_names();
    let names: Vec<String> = ctrl_aux
        .iter()
        .chain(model.aux_names())
        .map(|n| n.to_string())
        .collect();
    let mut trace = SimTrace::new(s.dt, names);
    let nominal = s.plant.nominal_output();
    let n = s.samples();
    let mut aux = Vec::with_capacity(8);
    let mut u_held = 0.0;

    let fail =
        |cause: Error, time: f64, partial: SimTrace| SimError::RunFailed(Box::new(RunFailure { cause, time, partial }));

    for k in 0..n {
        let t = k as f64 * s.dt;
        let y = model.output(&x, u_held);
        let r = s.reference.sample(t, nominal);
        let out = match controller.step(r, y, s.dt) {
            Ok(out) => out,
            Err(Error::Divergence { .. }) => return Err(fail(Error::Divergence { step: k }, t, trace)),
            Err(other) => return Err(fail(other, t, trace)),
        };
        if !out.u.is_finite() {
            return Err(fail(Error::Divergence { step: k }, t, trace));
        }
        aux.clear();
        aux.extend_from_slice(&out.aux[..ctrl_aux.len()]);
        model.aux(&x, &mut aux);
        trace.push(t, r, out.u, y, &aux);

        if k + 1 == n {
            break;
        }
        u_held = out.u;
        let t_next = (k + 1) as f64 * s.dt;
        let stepped =
            rk4_step(|x, u| model.derivative(x, u), &x, out.u, s.dt).and_then(|next| model.check(&next).map(|_| next));
        match stepped {
            Ok(next) => x = next,
            Err(Error::Divergence { .. }) => {
                return Err(fail(Error::Divergence { step: k }, t_next, trace));
            }
            Err(other) => return Err(fail(other, t_next, trace)),
        }
    }
    Ok(trace)
}
