//! TOML scenario files: schema, validation, overrides and the bundled set.

use std::path::Path;

use bundlesim::drive::BundleTarget;
use bundlesim::dynamics::{DecayRates, Tolerances};
use bundlesim::experiment::ExperimentParams;
use bundlesim::hilbert::ModelParams;
use bundlesim::rabi::{Parity, StateSelector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// κ_a·T_1 below this triggers a cycle-separation warning.
pub const CYCLE_SEPARATION_MIN: f64 = 5.0;

pub const BUNDLED: &[(&str, &str)] = &[
    ("fig2_sweep", include_str!("../scenarios/fig2_sweep.toml")),
    ("two_photon", include_str!("../scenarios/two_photon.toml")),
    ("three_photon", include_str!("../scenarios/three_photon.toml")),
    ("four_photon", include_str!("../scenarios/four_photon.toml")),
    ("six_photon", include_str!("../scenarios/six_photon.toml")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Closed,
    Master,
    Trajectory,
    Correlators,
    CoeffSweep,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Closed => "closed",
            RunKind::Master => "master",
            RunKind::Trajectory => "trajectory",
            RunKind::Correlators => "correlators",
            RunKind::CoeffSweep => "coeff-sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<PulseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub kind: RunKind,
    /// Pulse cycles; defaults to 3 for master/trajectory and 1 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(default = "default_points_per_cycle")]
    pub points_per_cycle: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_tau_points")]
    pub tau_points: usize,
    /// τ range in units of the cavity lifetime 1/κ_a.
    #[serde(default = "default_tau_lifetimes")]
    pub tau_lifetimes: f64,
    /// Start every cycle from the initial state (needed when the cascade
    /// does not return to it, as for an odd start photon number).
    #[serde(default)]
    pub reprepare_each_cycle: bool,
    /// Correlator runs: compare the single-photon g2 with the adiabatic
    /// estimate from this time to the end of the first pulse pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_from: Option<f64>,
    /// Replace the open-system (master, trajectory) integrator tolerances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
}

impl RunSection {
    pub fn open_tolerances(&self) -> Tolerances {
        let d = Tolerances::open();
        Tolerances { rtol: self.rtol.unwrap_or(d.rtol), atol: self.atol.unwrap_or(d.atol), ..d }
    }
}

fn default_points_per_cycle() -> usize {
    2000
}
fn default_seed() -> u64 {
    1
}
fn default_n_traj() -> usize {
    500
}
fn default_tau_points() -> usize {
    300
}
fn default_tau_lifetimes() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    pub omega_b: f64,
    #[serde(default = "one")]
    pub omega_c: f64,
    #[serde(default)]
    pub omega_g: f64,
    #[serde(default = "one")]
    pub omega_e: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    pub n_fock: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_states: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub state: usize,
    pub pairs: usize,
    #[serde(default)]
    pub detuning: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub pump_amplitude: f64,
    pub amplitude_ratio: f64,
    pub pump_center: f64,
    pub stokes_center: f64,
    pub width: f64,
    pub period: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaSection {
    pub a: f64,
    pub ge: f64,
    pub bg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub n_fock: usize,
    #[serde(default = "default_sweep_omega_b")]
    pub omega_b: f64,
    pub states: Vec<SweepState>,
}

fn default_sweep_omega_b() -> f64 {
    -6.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepState {
    /// Ascending-energy index at `lambda_min`; exclusive with `parity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    /// "even" or "odd", together with `rank`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<String>,
    #[serde(default)]
    pub rank: usize,
    /// Label used in output file names.
    pub label: String,
    pub photons: Vec<usize>,
}

impl SweepState {
    pub fn selector(&self) -> Result<StateSelector, CliError> {
        match (self.index, self.parity.as_deref()) {
            (Some(n), None) => Ok(StateSelector::Index(n)),
            (None, Some("even")) => Ok(StateSelector::Parity(Parity::Even, self.rank)),
            (None, Some("odd")) => Ok(StateSelector::Parity(Parity::Odd, self.rank)),
            _ => Err(CliError::Validation(format!(
                "sweep state '{}' needs exactly one of `index` or `parity = \"even\"|\"odd\"`",
                self.label
            ))),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let s: Scenario = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(&path.display().to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_toml()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// A bundled scenario by name, or a file path.
    pub fn resolve(name_or_path: &str) -> Result<Self, CliError> {
        if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
            return Self::from_toml(text).map_err(|e| e.context(name_or_path));
        }
        Self::load(Path::new(name_or_path))
    }

    /// Sets dotted `key=value` pairs (TOML literals; bare words become
    /// strings) and re-validates.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc: toml::Value = toml::Value::try_from(self).expect("scenario serializes");
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("override '{item}' is not key=value")))?;
            let value = parse_literal(raw.trim());
            set_path(&mut doc, key.trim(), value)?;
        }
        let s: Scenario = doc.try_into().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn cycles(&self) -> usize {
        self.run.cycles.unwrap_or(match self.run.kind {
            RunKind::Master | RunKind::Trajectory => 3,
            _ => 1,
        })
    }

    /// Non-fatal findings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let (Some(k), Some(p)) = (&self.kappa, &self.pulses) {
            let product = k.a * p.period;
            if matches!(self.run.kind, RunKind::Master | RunKind::Trajectory | RunKind::Correlators)
                && product < CYCLE_SEPARATION_MIN
            {
                out.push(format!(
                    "kappa_a * T_1 = {product:.3} < {CYCLE_SEPARATION_MIN}: photons of one cycle may not be released before the next"
                ));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        if self.name.trim().is_empty() {
            return bad("name must not be empty".into());
        }
        if self.run.points_per_cycle < 2 {
            return bad("run.points_per_cycle must be at least 2".into());
        }
        for (name, v) in [("rtol", self.run.rtol), ("atol", self.run.atol)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return bad(format!("run.{name} must lie in (0, 1) (got {v})"));
                }
            }
        }
        if self.run.cycles == Some(0) {
            return bad("run.cycles must be positive".into());
        }
        if let Some(k) = &self.kappa {
            for (name, v) in [("a", k.a), ("ge", k.ge), ("bg", k.bg)] {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("kappa.{name} must be a finite value >= 0 (got {v})"));
                }
            }
        }
        match self.run.kind {
            RunKind::CoeffSweep => {
                let Some(sw) = &self.sweep else {
                    return bad("run.kind = coeff-sweep requires a [sweep] section".into());
                };
                if !(sw.lambda_min >= 0.0 && sw.lambda_max > sw.lambda_min) || sw.points < 2 {
                    return bad("sweep needs 0 <= lambda_min < lambda_max and points >= 2".into());
                }
                if sw.states.is_empty() {
                    return bad("sweep.states must not be empty".into());
                }
                for st in &sw.states {
                    st.selector()?;
                    if let Some(&m) = st.photons.iter().find(|&&m| m >= sw.n_fock) {
                        return bad(format!("sweep photon number {m} is outside n_fock = {}", sw.n_fock));
                    }
                }
            }
            kind => {
                let missing: Vec<&str> = [
                    ("model", self.model.is_none()),
                    ("truncation", self.truncation.is_none()),
                    ("target", self.target.is_none()),
                    ("pulses", self.pulses.is_none()),
                    ("kappa", self.kappa.is_none() && kind != RunKind::Closed),
                ]
                .iter()
                .filter(|(_, m)| *m)
                .map(|(n, _)| *n)
                .collect();
                if !missing.is_empty() {
                    return bad(format!("run.kind = {} requires section(s): {}", kind.name(), missing.join(", ")));
                }
                if kind == RunKind::Trajectory && self.run.n_traj == 0 {
                    return bad("run.n_traj must be positive".into());
                }
                if kind == RunKind::Correlators {
                    if self.run.tau_points < 2 || !(self.run.tau_lifetimes > 0.0) {
                        return bad("correlators need tau_points >= 2 and tau_lifetimes > 0".into());
                    }
                    if !(self.kappa.as_ref().map_or(0.0, |k| k.a) > 0.0) {
                        return bad("correlators need kappa.a > 0 to set the delay range".into());
                    }
                }
                self.experiment_params()?.validate().map_err(|e| CliError::Validation(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Physical parameters for the dynamics run kinds. Closed runs ignore
    /// any `[kappa]` section.
    pub fn experiment_params(&self) -> Result<ExperimentParams, CliError> {
        let missing = |s: &str| CliError::Validation(format!("missing [{s}] section"));
        let m = self.model.as_ref().ok_or_else(|| missing("model"))?;
        let tr = self.truncation.as_ref().ok_or_else(|| missing("truncation"))?;
        let tg = self.target.as_ref().ok_or_else(|| missing("target"))?;
        let p = self.pulses.as_ref().ok_or_else(|| missing("pulses"))?;
        let kappa = match (&self.kappa, self.run.kind) {
            (_, RunKind::Closed) | (None, _) => DecayRates::uniform(0.0),
            (Some(k), _) => DecayRates { a: k.a, ge: k.ge, bg: k.bg },
        };
        Ok(ExperimentParams {
            model: ModelParams { omega_c: m.omega_c, omega_e: m.omega_e, omega_g: m.omega_g, omega_b: m.omega_b, lambda: m.lambda },
            n_fock: tr.n_fock,
            target: BundleTarget::new(tg.state, tg.pairs, tg.detuning),
            pump_amplitude: p.pump_amplitude,
            amplitude_ratio: p.amplitude_ratio,
            pump_center: p.pump_center,
            stokes_center: p.stokes_center,
            width: p.width,
            period: p.period,
            n_cycles: self.cycles(),
            kappa,
            rabi_states: tr.rabi_states,
        })
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {raw}")).map(|w| w.v).unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

fn set_path(doc: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("override key '{key}': '{part}' is not inside a table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(CliError::Validation(format!("empty override key '{key}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, _) in BUNDLED {
            let s = Scenario::resolve(name).unwrap();
            assert_eq!(&s.name, name);
        }
    }

    #[test]
    fn literal_parsing() {
        assert_eq!(parse_literal("3"), toml::Value::Integer(3));
        assert_eq!(parse_literal("1e-4"), toml::Value::Float(1e-4));
        assert_eq!(parse_literal("master"), toml::Value::String("master".into()));
        assert_eq!(parse_literal("true"), toml::Value::Boolean(true));
    }

    #[test]
    fn overrides_are_applied_and_checked() {
        let s = Scenario::resolve("two_photon").unwrap();
        let o = s.with_overrides(&["pulses.width=2300".into(), "run.kind=closed".into()]).unwrap();
        assert_eq!(o.pulses.unwrap().width, 2300.0);
        assert_eq!(o.run.kind, RunKind::Closed);
        assert!(matches!(s.with_overrides(&["pulses.widht=1".into()]), Err(CliError::Parse(_))));
        assert!(matches!(s.with_overrides(&["kappa.a=-1.0".into()]), Err(CliError::Validation(_))));
        assert!(matches!(s.with_overrides(&["nonsense".into()]), Err(CliError::Validation(_))));
    }

    #[test]
    fn cycle_separation_warning() {
        let s = Scenario::resolve("two_photon").unwrap().with_overrides(&["kappa.a=1e-5".into()]).unwrap();
        assert_eq!(s.warnings().len(), 1);
        assert!(Scenario::resolve("two_photon").unwrap().warnings().is_empty());
    }

    #[test]
    fn sweep_requires_its_section() {
        let s = Scenario::resolve("two_photon").unwrap();
        assert!(matches!(s.with_overrides(&["run.kind=coeff-sweep".into()]), Err(CliError::Validation(_))));
    }
}
