//! Scenario configuration files (TOML).
//!
//! ```toml
//! [plant]              # kind = nonlinear | linearized | transfer_function | first_order
//! [controller]         # single controller, used by `run` and `drift-sweep`
//! [[controllers]]      # named list, used by `compare`
//! [reference]          # kind = step | square | constant
//! [sim]                # dt, horizon
//! [outputs]            # dir, plots
//! [metrics]            # settling_band, rise_low, rise_high, steady_window,
//!                      # relative_to_initial, channel
//! [analysis]           # root-locus gain grid and force-curve grid
//! [[drift.periods]]    # label plus parameter overrides
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use maglev_core::analysis::MetricConventions;
use maglev_core::controllers::ControllerSpec;
use maglev_core::plant::MaglevParams;
use maglev_core::sim::{PlantSpec, Reference, Scenario};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub plant: PlantSpec,
    #[serde(default)]
    pub controller: Option<ControllerSpec>,
    #[serde(default)]
    pub controllers: Vec<NamedController>,
    #[serde(default = "default_reference")]
    pub reference: Reference,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub drift: Option<DriftSpec>,
    /// Reserved; every computation is deterministic.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_reference() -> Reference {
    Reference::step(1.0)
}

#[derive(Debug, Clone, Deserialize)]
pub struct NamedController {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: ControllerSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: 1e-3,
            horizon: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub plots: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub settling_band: f64,
    pub rise_low: f64,
    pub rise_high: f64,
    pub steady_window: f64,
    pub relative_to_initial: bool,
    /// Trace channel the step metrics are computed on.
    pub channel: String,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let c = MetricConventions::default();
        MetricsSection {
            settling_band: c.settling_band,
            rise_low: c.rise_low,
            rise_high: c.rise_high,
            steady_window: c.steady_window,
            relative_to_initial: c.relative_to_initial,
            channel: "y".into(),
        }
    }
}

impl MetricsSection {
    pub fn conventions(&self) -> MetricConventions {
        MetricConventions {
            settling_band: self.settling_band,
            rise_low: self.rise_low,
            rise_high: self.rise_high,
            steady_window: self.steady_window,
            relative_to_initial: self.relative_to_initial,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub gain_min: f64,
    pub gain_max: f64,
    pub gain_count: usize,
    /// Gap for the force-current curve; defaults to the plant's `z0`.
    pub force_gap: Option<f64>,
    /// Upper end of the current grid; defaults to twice the equilibrium current.
    pub current_max: Option<f64>,
    pub current_points: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            gain_min: 1e-3,
            gain_max: 1e4,
            gain_count: 400,
            force_gap: None,
            current_max: None,
            current_points: 101,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    #[serde(default)]
    pub periods: Vec<DriftPeriod>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftPeriod {
    pub label: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub plots: bool,
    /// Settling band, percent.
    pub band_pct: Option<f64>,
}

/// A parsed, resolved and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub out_dir: PathBuf,
    pub plots: bool,
    pub conventions: MetricConventions,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            message: format!("cannot read config {}: {e}", path.display()),
            location: None,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, overrides)
    }

    /// Parses `text`; relative rule-file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let mut file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config {
            message: e.message().trim().to_string(),
            location: e.span().map(|span| line_col(text, span.start)),
        })?;
        for spec in file
            .controller
            .iter_mut()
            .chain(file.controllers.iter_mut().map(|c| &mut c.spec))
        {
            if let ControllerSpec::Fuzzy(cfg) = spec {
                if let Some(p) = &cfg.rules_file {
                    if p.is_relative() {
                        cfg.rules_file = Some(base.join(p));
                    }
                }
            }
        }

        let mut conventions = file.metrics.conventions();
        if let Some(pct) = overrides.band_pct {
            conventions.settling_band = pct / 100.0;
        }
        conventions.validate().map_err(|e| semantic("metrics", e))?;
        if !matches!(file.metrics.channel.as_str(), "y" | "u" | "e" | "r") && !known_aux(&file, &file.metrics.channel) {
            return Err(semantic(
                "metrics",
                format!("unknown metrics channel `{}`", file.metrics.channel),
            ));
        }
        let out_dir = overrides
            .out
            .clone()
            .or_else(|| file.outputs.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let plots = overrides.plots || file.outputs.plots;
        Ok(RunConfig {
            file,
            out_dir,
            plots,
            conventions,
        })
    }

    fn scenario_for(&self, controller: &ControllerSpec, section: &str) -> Result<Scenario, CliError> {
        let s = Scenario {
            plant: self.file.plant.clone(),
            controller: controller.clone(),
            reference: self.file.reference,
            dt: self.file.sim.dt,
            horizon: self.file.sim.horizon,
        };
        s.validate().map_err(|e| semantic(section, e))?;
        Ok(s)
    }

    /// The scenario of the single `[controller]` section.
    pub fn single(&self) -> Result<Scenario, CliError> {
        let c = self
            .file
            .controller
            .as_ref()
            .ok_or_else(|| semantic("controller", "a [controller] section is required"))?;
        self.scenario_for(c, "controller")
    }

    /// Named scenarios of `[[controllers]]`, in listing order.
    pub fn comparison(&self) -> Result<Vec<(String, Scenario)>, CliError> {
        if self.file.controllers.len() < 2 {
            return Err(semantic(
                "controllers",
                format!(
                    "comparison needs at least 2 controllers, got {}",
                    self.file.controllers.len()
                ),
            ));
        }
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut out = Vec::new();
        for (k, c) in self.file.controllers.iter().enumerate() {
            let base = c.name.clone().unwrap_or_else(|| c.spec.label().to_string());
            check_name(&base, &format!("controllers[{k}]"))?;
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            let name = if *count == 1 { base } else { format!("{base}-{count}") };
            out.push((name, self.scenario_for(&c.spec, &format!("controllers[{k}]"))?));
        }
        Ok(out)
    }

    /// One scenario per drift period, with its overrides applied.
    pub fn drift(&self) -> Result<Vec<DriftRun>, CliError> {
        let base = self.single()?;
        let periods = match &self.file.drift {
            Some(d) if !d.periods.is_empty() => &d.periods,
            _ => return Err(semantic("drift", "at least one [[drift.periods]] entry is required")),
        };
        if base.plant.maglev_params().is_none() {
            return Err(semantic(
                "drift",
                "drift overrides need a nonlinear or linearized maglev plant",
            ));
        }
        let mut labels = Vec::new();
        let mut out = Vec::new();
        for (k, period) in periods.iter().enumerate() {
            let section = format!("drift.periods[{k}]");
            check_name(&period.label, &section)?;
            if labels.contains(&period.label) {
                return Err(semantic(&section, format!("duplicate period label `{}`", period.label)));
            }
            labels.push(period.label.clone());
            let mut s = base.clone();
            let params: &mut MaglevParams = s.plant.maglev_params_mut().expect("checked above");
            for (field, &value) in &period.overrides {
                params.set_field(field, value).map_err(|e| semantic(&section, e))?;
            }
            s.validate().map_err(|e| semantic(&section, e))?;
            out.push((period.label.clone(), period.overrides.clone(), s));
        }
        Ok(out)
    }
}

/// Label, overrides and scenario of one drift period.
pub type DriftRun = (String, BTreeMap<String, f64>, Scenario);

fn known_aux(file: &ConfigFile, channel: &str) -> bool {
    let plant_aux: &[&str] = match file.plant {
        PlantSpec::Nonlinear { .. } => &["z", "i"],
        PlantSpec::Linearized { .. } => &["z"],
        _ => &[],
    };
    plant_aux.contains(&channel)
        || file
            .controller
            .iter()
            .chain(file.controllers.iter().map(|c| &c.spec))
            .any(|c| c.aux_names().contains(&channel))
}

fn check_name(name: &str, section: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "_-+.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(semantic(
            section,
            format!("name `{name}` must be non-empty and use only letters, digits, `_`, `-`, `+`, `.`"),
        ))
    }
}

fn semantic(section: &str, e: impl ToString) -> CliError {
    CliError::Config {
        message: e.to_string(),
        location: Some(format!("section={section}")),
    }
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    format!("line={line} column={column}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."), &Overrides::default())
    }

    const MINIMAL: &str = r#"
[plant]
kind = "first_order"

[controller]
kind = "pid"
kp = 2.0
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        let s = cfg.single().unwrap();
        assert_eq!(s.dt, 1e-3);
        assert_eq!(s.horizon, 10.0);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.conventions, MetricConventions::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse("[plant]\nkind = \"first_order\"\n\n[controller]\nkind = \"pid\"\nkpp = 2.0\n").unwrap_err();
        match err {
            CliError::Config { message, location } => {
                assert!(message.contains("kpp"), "{message}");
                // Tagged sections are buffered whole, so the span is the table header.
                assert_eq!(location.as_deref(), Some("line=4 column=1"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("[plant]\nkind = \"nonlinear\"\n[plant.params]\nmass = 2.0\n").is_err());
        assert!(parse("[plant]\nkind = \"first_order\"\n[sim]\nstep = 0.1\n").is_err());
        assert!(parse("[plant]\nkind = \"first_order\"\n[metrics]\nband = 0.1\n").is_err());
    }

    #[test]
    fn named_controllers_reject_unknown_keys() {
        let text = "[plant]\nkind = \"first_order\"\n[[controllers]]\nname = \"a\"\nkind = \"mras\"\ngamma = 1.0\n";
        assert!(parse(text).is_err());
    }

    #[test]
    fn comparison_rules() {
        let one = "[plant]\nkind = \"first_order\"\n[[controllers]]\nkind = \"pid\"\nkp = 1.0\n";
        assert!(parse(one).unwrap().comparison().is_err());
        let same = format!("{one}[[controllers]]\nkind = \"pid\"\nkp = 1.0\n");
        let names: Vec<String> = parse(&same)
            .unwrap()
            .comparison()
            .unwrap()
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        assert_eq!(names, ["pid", "pid-2"]);
    }

    #[test]
    fn drift_rules() {
        let base = "[plant]\nkind = \"nonlinear\"\n[controller]\nkind = \"open_loop\"\n";
        assert!(parse(base).unwrap().drift().is_err());
        let empty = format!("{base}[drift]\nperiods = []\n");
        assert!(parse(&empty).unwrap().drift().is_err());
        let bad_field = format!("{base}[[drift.periods]]\nlabel = \"p\"\noverrides = {{ gap = 0.01 }}\n");
        assert!(parse(&bad_field).unwrap().drift().is_err());
        let ok = format!(
            "{base}[[drift.periods]]\nlabel = \"present\"\noverrides = {{ z0 = 0.006 }}\n[[drift.periods]]\nlabel = \"+10y\"\noverrides = {{ z0 = 0.0061 }}\n"
        );
        let periods = parse(&ok).unwrap().drift().unwrap();
        assert_eq!(periods.len(), 2);
        assert_eq!(periods[1].2.plant.maglev_params().unwrap().z0, 0.0061);
    }

    #[test]
    fn band_override_and_validation() {
        let cfg = RunConfig::parse(
            MINIMAL,
            Path::new("."),
            &Overrides {
                band_pct: Some(5.0),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.conventions.settling_band, 0.05);
        let bad = RunConfig::parse(
            MINIMAL,
            Path::new("."),
            &Overrides {
                band_pct: Some(60.0),
                ..Overrides::default()
            },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn semantic_errors_name_their_section() {
        let text = "[plant]\nkind = \"first_order\"\n[controller]\nkind = \"pid\"\nn = -1.0\n";
        match parse(text).unwrap().single().unwrap_err() {
            CliError::Config { location, .. } => assert_eq!(location.as_deref(), Some("section=controller")),
            other => panic!("{other:?}"),
        }
    }
}
