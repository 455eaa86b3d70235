//! Run outcomes and their on-disk artifacts.

use std::fmt::Write as _;
use std::path::Path;

use maglev_core::analysis::{step_metrics_with, MetricConventions, StepMetrics};
use maglev_core::controllers::{mras_tracking_error, ControllerSpec};
use maglev_core::sim::{simulate, PlantSpec, Scenario, SimError, SimTrace};
use maglev_core::Error;

use crate::{io_err, CliError};

/// Where a run stopped early.
#[derive(Debug, Clone)]
pub struct Failure {
    pub cause: Error,
    pub time: f64,
}

impl Failure {
    pub fn cause_name(&self) -> &'static str {
        match self.cause {
            Error::GapCollapse { .. } => "gap_collapse",
            Error::Divergence { .. } => "divergence",
            _ => "run_error",
        }
    }
}

/// One simulated scenario with its metrics.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub scenario: Scenario,
    pub trace: SimTrace,
    pub failure: Option<Failure>,
    /// Step metrics, or why they could not be computed.
    pub metrics: Result<StepMetrics, String>,
    /// Controller-specific figures (MRAS gains and tracking error).
    pub extra: Vec<(String, f64)>,
}

impl Outcome {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// Simulates `scenario` and evaluates metrics on `channel`.
pub fn evaluate(name: &str, scenario: &Scenario, conv: &MetricConventions, channel: &str) -> Result<Outcome, CliError> {
    let (trace, failure) = match simulate(scenario) {
        Ok(trace) => (trace, None),
        Err(SimError::RunFailed(f)) => {
            let f = *f;
            (
                f.partial,
                Some(Failure {
                    cause: f.cause,
                    time: f.time,
                }),
            )
        }
        Err(SimError::InvalidScenario(e)) => {
            return Err(CliError::Config {
                message: e.to_string(),
                location: None,
            })
        }
    };
    let metrics = if failure.is_some() {
        Err("run failed".to_string())
    } else {
        step_metrics_with(&trace, channel, conv).map_err(|e| e.to_string())
    };
    let mut extra = Vec::new();
    if failure.is_none() && matches!(scenario.controller, ControllerSpec::Mras(_)) {
        if let Ok(rms) = mras_tracking_error(&trace) {
            extra.push(("tracking_error_rms".to_string(), rms));
        }
        for name in ["t0", "s0"] {
            if let Some(v) = trace.channel(name).and_then(|c| c.last()) {
                extra.push((format!("{name}_final"), *v));
            }
        }
    }
    Ok(Outcome {
        name: name.to_string(),
        scenario: scenario.clone(),
        trace,
        failure,
        metrics,
        extra,
    })
}

pub fn plant_label(p: &PlantSpec) -> &'static str {
    match p {
        PlantSpec::Nonlinear { .. } => "nonlinear",
        PlantSpec::Linearized { .. } => "linearized",
        PlantSpec::TransferFunction { .. } => "transfer_function",
        PlantSpec::FirstOrder { .. } => "first_order",
    }
}

fn opt(v: Option<f64>, missing: &str) -> String {
    v.map_or_else(|| missing.to_string(), |x| x.to_string())
}

/// `metrics.txt` contents.
pub fn metrics_text(o: &Outcome, conv: &MetricConventions, channel: &str) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("status", if o.ok() { "ok" } else { "failed" }.into());
    kv("controller", o.scenario.controller.label().into());
    kv("plant", plant_label(&o.scenario.plant).into());
    kv("dt", o.scenario.dt.to_string());
    kv("horizon", o.scenario.horizon.to_string());
    kv("samples", o.trace.len().to_string());
    if let Some(f) = &o.failure {
        kv("failure_cause", f.cause_name().into());
        kv("failure_time", f.time.to_string());
        kv("failure_detail", f.cause.to_string());
    }
    kv("metrics_channel", channel.into());
    kv("settling_band", conv.settling_band.to_string());
    match &o.metrics {
        Ok(m) => {
            kv("rise_time", opt(m.rise_time, "not_reached"));
            kv("settling_time", opt(m.settling_time, "not_settled"));
            kv("percent_overshoot", m.percent_overshoot.to_string());
            kv("max_overshoot", m.max_overshoot.to_string());
            kv("steady_state_value", m.steady_state_value.to_string());
            kv("zero_final", m.zero_final.to_string());
        }
        Err(e) if o.ok() => kv("metrics_error", format!("{e:?}")),
        Err(_) => {}
    }
    for (k, v) in &o.extra {
        kv(k, v.to_string());
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// Writes `trace.csv` and `metrics.txt` into `dir`.
pub fn write_outcome(dir: &Path, o: &Outcome, conv: &MetricConventions, channel: &str) -> Result<(), CliError> {
    create_dir(dir)?;
    write_file(&dir.join("trace.csv"), &o.trace.to_csv())?;
    write_file(&dir.join("metrics.txt"), &metrics_text(o, conv, channel))
}

/// Fields for the stderr line of a set of failed runs.
pub fn failure_error(outcomes: &[&Outcome]) -> Option<CliError> {
    let failed: Vec<&Outcome> = outcomes.iter().copied().filter(|o| !o.ok()).collect();
    let first = failed.first()?;
    let f = first.failure.as_ref().expect("failed outcome");
    let mut fields = vec![
        ("run".to_string(), first.name.clone()),
        ("cause".to_string(), f.cause_name().to_string()),
        ("time".to_string(), f.time.to_string()),
    ];
    if outcomes.len() > 1 {
        let names: Vec<&str> = failed.iter().map(|o| o.name.as_str()).collect();
        fields.push(("failed".to_string(), names.join(",")));
    }
    let message = if outcomes.len() > 1 {
        format!("{} of {} runs failed; first: {}", failed.len(), outcomes.len(), f.cause)
    } else {
        f.cause.to_string()
    };
    Some(CliError::Simulation { message, fields })
}

/// A rendered table, as aligned text and as CSV.
pub struct Table {
    pub header: Vec<String>,
    pub csv_header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn csv(&self) -> String {
        let mut s = self.csv_header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Aligned columns; numbers are shown to four decimals.
    pub fn text(&self) -> String {
        let rows: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|c| short(c)).collect()).collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| {
                rows.iter()
                    .map(|r| r[j].len())
                    .chain([self.header[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut s = line(&self.header);
        for row in &rows {
            s.push_str(&line(row));
        }
        s
    }
}

fn short(c: &str) -> String {
    match c.parse::<f64>() {
        Ok(v) if c.contains('.') || c.contains('e') => format!("{v:.4}"),
        _ => c.to_string(),
    }
}

fn cell(v: Option<f64>, status: &str) -> String {
    v.filter(|x| x.is_finite())
        .map_or_else(|| status.to_string(), |x| x.to_string())
}

fn row_status(o: &Outcome) -> String {
    match (&o.failure, &o.metrics) {
        (Some(f), _) => format!("failed:{}", f.cause_name()),
        (None, Err(_)) => "no_metrics".into(),
        (None, Ok(_)) => "ok".into(),
    }
}

fn metric_cells(o: &Outcome) -> [String; 4] {
    let m = o.metrics.as_ref().ok();
    [
        cell(m.and_then(|m| m.rise_time).map(|r| r * 1e3), "na"),
        cell(m.and_then(|m| m.settling_time), "na"),
        cell(m.map(|m| m.percent_overshoot), "na"),
        cell(m.map(|m| m.steady_state_value), "na"),
    ]
}

/// Rise time (ms), settling time (s), percent overshoot and steady-state
/// value per controller.
pub fn comparison_table(outcomes: &[Outcome]) -> Table {
    let rows = outcomes
        .iter()
        .map(|o| {
            let mut r = vec![o.name.clone()];
            r.extend(metric_cells(o));
            r.push(row_status(o));
            r
        })
        .collect();
    Table {
        header: [
            "controller",
            "Rise time (ms)",
            "Settling time (s)",
            "Percent overshoot (%)",
            "Steady state value",
            "status",
        ]
        .map(String::from)
        .to_vec(),
        csv_header: [
            "controller",
            "rise_time_ms",
            "settling_time_s",
            "percent_overshoot",
            "steady_state_value",
            "status",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}

/// Max overshoot (absolute), rise time, settling time and percent
/// overshoot per drift period.
pub fn drift_table(periods: &[(String, String, Outcome)]) -> Table {
    let rows = periods
        .iter()
        .map(|(label, overrides, o)| {
            let m = o.metrics.as_ref().ok();
            let [rise, settling, pct, steady] = metric_cells(o);
            vec![
                label.clone(),
                overrides.clone(),
                cell(m.map(|m| m.max_overshoot), "na"),
                rise,
                settling,
                pct,
                steady,
                row_status(o),
            ]
        })
        .collect();
    Table {
        header: [
            "period",
            "overrides",
            "Max overshoot",
            "Rise time (ms)",
            "Settling time (s)",
            "Percent overshoot (%)",
            "Steady state value",
            "status",
        ]
        .map(String::from)
        .to_vec(),
        csv_header: [
            "period",
            "overrides",
            "max_overshoot",
            "rise_time_ms",
            "settling_time_s",
            "percent_overshoot",
            "steady_state_value",
            "status",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}
