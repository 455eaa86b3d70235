//! The four verbs. Every configuration check completes before the output
//! directory is created.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use maglev_core::analysis::{force_current_curve, is_stable, log_gains, root_locus};
use maglev_core::controllers::{zn_pid_gains, zn_ultimate_gain};
use maglev_core::numcore::{format_complex, sort_roots, Complex64, TransferFunction};
use maglev_core::plant::{equilibrium_current, linearize};
use maglev_core::Error;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::plots::{chart, Series};
use crate::report::{self, create_dir, write_file, write_outcome, Outcome};
use crate::CliError;

fn config_error(section: &str, e: impl ToString) -> CliError {
    CliError::Config {
        message: e.to_string(),
        location: Some(format!("section={section}")),
    }
}

fn channel_series<'a>(o: &Outcome, name: &'a str) -> Series<'a> {
    let t = o.trace.channel("t").unwrap_or(&[]);
    let v = o.trace.channel(name).unwrap_or(&[]);
    Series {
        name,
        points: t.iter().copied().zip(v.iter().copied()).collect(),
    }
}

fn run_plots(dir: &Path, o: &Outcome) -> Result<(), CliError> {
    chart(
        &dir.join("response.svg"),
        &format!("{} response", o.name),
        "t (s)",
        "output",
        &[channel_series(o, "r"), channel_series(o, "y")],
        false,
    )?;
    chart(
        &dir.join("control.svg"),
        &format!("{} control", o.name),
        "t (s)",
        "u",
        &[channel_series(o, "u")],
        false,
    )
}

fn overlay_plot(path: &Path, title: &str, outcomes: &[&Outcome], channel: &str) -> Result<(), CliError> {
    let series: Vec<Series> = outcomes
        .iter()
        .map(|o| Series {
            name: &o.name,
            points: channel_series(o, channel).points,
        })
        .collect();
    chart(path, title, "t (s)", channel, &series, false)
}

fn summary_line(o: &Outcome) -> String {
    match (&o.failure, &o.metrics) {
        (Some(f), _) => format!("{}: failed ({}) at t={}", o.name, f.cause_name(), f.time),
        (None, Ok(m)) => format!(
            "{}: rise_time={} settling_time={} percent_overshoot={:.4} steady_state_value={}",
            o.name,
            m.rise_time.map_or("not_reached".into(), |r| r.to_string()),
            m.settling_time.map_or("not_settled".into(), |s| s.to_string()),
            m.percent_overshoot,
            m.steady_state_value
        ),
        (None, Err(e)) => format!("{}: no step metrics ({e})", o.name),
    }
}

/// `trace.csv` and `metrics.txt` for the `[controller]` scenario.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let scenario = cfg.single()?;
    let channel = &cfg.file.metrics.channel;
    let name = scenario.controller.label();
    let o = report::evaluate(name, &scenario, &cfg.conventions, channel)?;
    write_outcome(&cfg.out_dir, &o, &cfg.conventions, channel)?;
    if cfg.plots {
        run_plots(&cfg.out_dir, &o)?;
    }
    if let Some(e) = report::failure_error(&[&o]) {
        return Err(e);
    }
    Ok(format!("{}\nwrote {}\n", summary_line(&o), cfg.out_dir.display()))
}

/// Every `[[controllers]]` entry against the shared plant and reference.
pub fn compare(cfg: &RunConfig) -> Result<String, CliError> {
    let scenarios = cfg.comparison()?;
    let channel = &cfg.file.metrics.channel;
    let outcomes: Vec<Outcome> = scenarios
        .par_iter()
        .map(|(name, s)| report::evaluate(name, s, &cfg.conventions, channel))
        .collect::<Result<_, _>>()?;
    create_dir(&cfg.out_dir)?;
    for o in &outcomes {
        let dir = cfg.out_dir.join(&o.name);
        write_outcome(&dir, o, &cfg.conventions, channel)?;
        if cfg.plots {
            run_plots(&dir, o)?;
        }
    }
    let table = report::comparison_table(&outcomes);
    write_file(&cfg.out_dir.join("comparison.txt"), &table.text())?;
    write_file(&cfg.out_dir.join("comparison.csv"), &table.csv())?;
    let refs: Vec<&Outcome> = outcomes.iter().collect();
    if cfg.plots {
        overlay_plot(&cfg.out_dir.join("comparison.svg"), "step responses", &refs, channel)?;
    }
    if let Some(e) = report::failure_error(&refs) {
        return Err(e);
    }
    Ok(format!("{}wrote {}\n", table.text(), cfg.out_dir.display()))
}

fn overrides_label(o: &BTreeMap<String, f64>) -> String {
    if o.is_empty() {
        return "none".into();
    }
    o.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// The `[controller]` scenario once per drift period.
pub fn drift_sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let periods = cfg.drift()?;
    let channel = &cfg.file.metrics.channel;
    let rows: Vec<(String, String, Outcome)> = periods
        .par_iter()
        .map(|(label, overrides, s)| {
            report::evaluate(label, s, &cfg.conventions, channel)
                .map(|o| (label.clone(), overrides_label(overrides), o))
        })
        .collect::<Result<_, _>>()?;
    create_dir(&cfg.out_dir)?;
    for (label, _, o) in &rows {
        let dir = cfg.out_dir.join(label);
        write_outcome(&dir, o, &cfg.conventions, channel)?;
        if cfg.plots {
            run_plots(&dir, o)?;
        }
    }
    let table = report::drift_table(&rows);
    write_file(&cfg.out_dir.join("drift.txt"), &table.text())?;
    write_file(&cfg.out_dir.join("drift.csv"), &table.csv())?;
    let refs: Vec<&Outcome> = rows.iter().map(|(_, _, o)| o).collect();
    if cfg.plots {
        overlay_plot(
            &cfg.out_dir.join("drift.svg"),
            "step response per period",
            &refs,
            channel,
        )?;
    }
    if let Some(e) = report::failure_error(&refs) {
        return Err(e);
    }
    Ok(format!("{}wrote {}\n", table.text(), cfg.out_dir.display()))
}

fn join_roots(roots: &[Complex64]) -> String {
    if roots.is_empty() {
        return "none".into();
    }
    roots.iter().map(|&z| format_complex(z)).collect::<Vec<_>>().join(";")
}

/// The loop gain sign for which positive `K` is negative feedback.
fn locus_plant(g: &TransferFunction) -> (f64, TransferFunction) {
    if g.num().leading() / g.den().leading() < 0.0 {
        let neg = TransferFunction::new(g.num().scale(-1.0), g.den().clone()).expect("same denominator");
        (-1.0, neg)
    } else {
        (1.0, g.clone())
    }
}

/// Linear analysis of the configured plant.
pub fn analyze(cfg: &RunConfig) -> Result<String, CliError> {
    let a = &cfg.file.analysis;
    if !(a.gain_min > 0.0 && a.gain_max > a.gain_min && a.gain_max.is_finite()) || a.gain_count < 2 {
        return Err(config_error(
            "analysis",
            "need 0 < gain_min < gain_max and gain_count >= 2",
        ));
    }
    if a.current_points < 2 {
        return Err(config_error("analysis", "current_points must be at least 2"));
    }
    let g = cfg
        .file
        .plant
        .transfer_function()
        .map_err(|e| config_error("plant", e))?;
    let params = cfg.file.plant.maglev_params();
    let force = match params {
        Some(p) => {
            let z = a.force_gap.unwrap_or(p.z0);
            let i_eq = equilibrium_current(p, p.z0).map_err(|e| config_error("plant", e))?;
            let i_max = a.current_max.unwrap_or(2.0 * i_eq);
            if !(i_max > 0.0 && i_max.is_finite()) {
                return Err(config_error("analysis", "current_max must be positive"));
            }
            let grid: Vec<f64> = (0..a.current_points)
                .map(|k| i_max * k as f64 / (a.current_points - 1) as f64)
                .collect();
            let curve = force_current_curve(p, z, &grid).map_err(|e| config_error("analysis", e))?;
            Some((z, i_eq, curve))
        }
        None => None,
    };

    let report = is_stable(&g);
    let (sign, lg) = locus_plant(&g);
    let locus =
        root_locus(&lg, &log_gains(a.gain_min, a.gain_max, a.gain_count)).map_err(|e| config_error("analysis", e))?;

    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("transfer_function", g.to_string());
    kv("numerator", g.num().to_string());
    kv("denominator", g.den().to_string());
    kv("poles", join_roots(&report.poles));
    let mut zeros = g.zeros();
    sort_roots(&mut zeros);
    kv("zeros", join_roots(&zeros));
    let dc = g.dc_gain();
    kv(
        "dc_gain",
        if dc.is_finite() {
            dc.to_string()
        } else {
            "infinite".into()
        },
    );
    kv("verdict", if report.stable { "stable" } else { "unstable" }.into());
    kv("offending_poles", join_roots(&report.offending));
    if let Some(p) = params {
        let (gains, _) = linearize(p, p.z0).map_err(|e| config_error("plant", e))?;
        kv("z0", p.z0.to_string());
        kv(
            "equilibrium_current",
            force.as_ref().map(|f| f.1).unwrap_or(f64::NAN).to_string(),
        );
        kv("ki", gains.ki.to_string());
        kv("kz", gains.kz.to_string());
    }
    kv("root_locus_sign", sign.to_string());
    match zn_ultimate_gain(&lg) {
        Ok((ku, tu)) => {
            let pid = zn_pid_gains(ku, tu);
            kv("zn_status", "tuned".into());
            kv("zn_ku", ku.to_string());
            kv("zn_tu", tu.to_string());
            kv("zn_kp", pid.kp.to_string());
            kv("zn_ki", pid.ki.to_string());
            kv("zn_kd", pid.kd.to_string());
        }
        Err(Error::NotTunable(why)) => {
            kv("zn_status", "not_tunable".into());
            kv("zn_reason", format!("{why:?}"));
        }
        Err(e) => {
            kv("zn_status", "not_tunable".into());
            kv("zn_reason", format!("{:?}", e.to_string()));
        }
    }

    create_dir(&cfg.out_dir)?;
    write_file(&cfg.out_dir.join("analysis.txt"), &s)?;
    let mut rl = String::from("gain,branch,re,im\n");
    for (k, &gain) in locus.gains.iter().enumerate() {
        for (j, z) in locus.branches[k].iter().enumerate() {
            let _ = writeln!(rl, "{gain},{j},{},{}", z.re, z.im);
        }
    }
    write_file(&cfg.out_dir.join("root_locus.csv"), &rl)?;
    if let Some((z, _, curve)) = &force {
        let mut fc = format!("# gap={z}\ni,f\n");
        for (i, f) in curve {
            let _ = writeln!(fc, "{i},{f}");
        }
        write_file(&cfg.out_dir.join("force_current.csv"), &fc)?;
    }
    if cfg.plots {
        let names: Vec<String> = (0..locus.branch_count()).map(|j| format!("branch {j}")).collect();
        let series: Vec<Series> = names
            .iter()
            .enumerate()
            .map(|(j, n)| Series {
                name: n,
                points: locus.branch(j).iter().map(|z| (z.re, z.im)).collect(),
            })
            .collect();
        chart(
            &cfg.out_dir.join("root_locus.svg"),
            "root locus",
            "Re",
            "Im",
            &series,
            true,
        )?;
        if let Some((z, _, curve)) = &force {
            chart(
                &cfg.out_dir.join("force_current.svg"),
                &format!("force vs current at gap {z} m"),
                "i (A)",
                "f (N)",
                &[Series {
                    name: "f",
                    points: curve.clone(),
                }],
                false,
            )?;
        }
    }
    Ok(format!("{s}wrote {}\n", cfg.out_dir.display()))
}
