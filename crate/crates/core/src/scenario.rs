//! Scenario files: a versioned TOML schema with unknown keys rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::grid::{GridParams, KGrid};
use crate::matter::{ChargeModel, ChargeParams};
use crate::observables::IrSettings;
use crate::pulse::PulseParams;
use crate::vector::Real3;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    /// Seeds randomized test data derived from the scenario; the pipeline
    /// itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub charge: ChargeParams,
    pub grid: GridParams,
    pub initial: InitialData,
    pub run: RunParams,
    #[serde(default)]
    pub observables: ObservableParams,
    #[serde(default)]
    pub acceptance: AcceptanceProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub v0: [f64; 3],
    #[serde(default)]
    pub q0: [f64; 3],
    #[serde(default)]
    pub pulse: Option<PulseParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunParams {
    /// Forward horizon; the backward run covers `[−t_backward, 0]`.
    pub t_final: f64,
    pub t_backward: f64,
    pub dt: f64,
    /// Steps between snapshots.
    pub sample_every: usize,
    /// Coarse step pair for the conservation scaling check.
    #[serde(default = "default_dt_pair")]
    pub dt_pair: [f64; 2],
    /// Bound on relative energy drift before a run is aborted.
    #[serde(default = "default_drift_abort")]
    pub energy_drift_abort: f64,
}

fn default_dt_pair() -> [f64; 2] {
    [0.16, 0.08]
}

fn default_drift_abort() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableParams {
    #[serde(default = "default_ir")]
    pub ir: IrSettings,
    /// Acceleration tail fit window.
    #[serde(default = "default_fit_window")]
    pub fit_window: [f64; 2],
    #[serde(default)]
    pub spatial: Option<SpatialParams>,
    #[serde(default)]
    pub coherent: CoherentParams,
    /// Velocity of the stationarity check run.
    #[serde(default = "default_stationarity_v")]
    pub stationarity_v: [f64; 3],
    #[serde(default = "default_stationarity_t")]
    pub stationarity_t: f64,
}

fn default_ir() -> IrSettings {
    IrSettings::default()
}

fn default_fit_window() -> [f64; 2] {
    [10.0, 40.0]
}

fn default_stationarity_v() -> [f64; 3] {
    [0.0, 0.0, 0.3]
}

fn default_stationarity_t() -> f64 {
    20.0
}

impl Default for ObservableParams {
    fn default() -> Self {
        Self {
            ir: default_ir(),
            fit_window: default_fit_window(),
            spatial: None,
            coherent: CoherentParams::default(),
            stationarity_v: default_stationarity_v(),
            stationarity_t: default_stationarity_t(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialParams {
    pub directions: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
    /// Snapshot times compared against `t = 0`.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentParams {
    pub v_inf: [f64; 3],
    pub directions: usize,
    pub times: Vec<f64>,
}

impl Default for CoherentParams {
    fn default() -> Self {
        Self {
            v_inf: [0.0, 0.0, 0.5],
            directions: 16,
            times: vec![0.0, 7.3],
        }
    }
}

/// Thresholds applied to measured quantities. Measurements never depend on
/// these values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceProfile {
    pub stationarity_velocity: f64,
    pub stationarity_field: f64,
    pub continuity: f64,
    pub conservation_drift: f64,
    pub scaling_ratio: [f64; 2],
    pub ir_transverse_drift: f64,
    pub ir_longitudinal_drift: f64,
    pub min_snapshots: usize,
    pub soft_photon: f64,
    pub transverse_identity: f64,
    pub wave_operator_ratio: f64,
    pub acceleration_exponent: f64,
    pub ir_extraction: f64,
    pub coherent: f64,
    pub spatial_drift: f64,
    pub flux: f64,
}

impl Default for AcceptanceProfile {
    fn default() -> Self {
        Self {
            stationarity_velocity: 1e-6,
            stationarity_field: 1e-4,
            continuity: 1e-12,
            conservation_drift: 1e-4,
            scaling_ratio: [8.0, 32.0],
            ir_transverse_drift: 1e-3,
            ir_longitudinal_drift: 1e-12,
            min_snapshots: 10,
            soft_photon: 5e-2,
            transverse_identity: 1e-14,
            wave_operator_ratio: 0.25,
            acceleration_exponent: -1.5,
            ir_extraction: 1e-6,
            coherent: 1e-10,
            spatial_drift: 5e-2,
            flux: 2e-2,
        }
    }
}

fn config_err<E: std::fmt::Display>(path: &str) -> impl FnOnce(E) -> Error + '_ {
    move |e| Error::config(path, e.to_string())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| locate_key(text, s.start))
                .unwrap_or_else(|| "<document>".into());
            Error::config(path, e.message().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::config(
                "schema",
                format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema),
            ));
        }
        self.model()?;
        self.grid().map_err(config_err("grid"))?;
        let v0 = Real3::from(self.initial.v0);
        if !(v0.norm() < 1.0) {
            return Err(Error::config("initial.v0", format!("|v0| = {} must be below 1", v0.norm())));
        }
        if !self.initial.q0.iter().all(|c| c.is_finite()) {
            return Err(Error::config("initial.q0", "must be finite"));
        }
        if let Some(p) = &self.initial.pulse {
            p.validate().map_err(config_err("initial.pulse"))?;
        }
        let run = &self.run;
        if !(run.dt > 0.0 && run.dt.is_finite()) {
            return Err(Error::config("run.dt", format!("dt = {} must be positive", run.dt)));
        }
        for (name, t) in [("run.t_final", run.t_final), ("run.t_backward", run.t_backward)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config(name, format!("{t} must be positive")));
            }
            steps_for(t, run.dt).ok_or_else(|| Error::config(name, format!("dt = {} does not divide {t}", run.dt)))?;
        }
        if run.sample_every == 0 {
            return Err(Error::config("run.sample_every", "must be at least 1"));
        }
        for (i, &dt) in run.dt_pair.iter().enumerate() {
            let path = format!("run.dt_pair[{i}]");
            if !(dt > 0.0) || steps_for(run.t_final, dt).is_none() {
                return Err(Error::config(path, format!("{dt} must be positive and divide t_final")));
            }
        }
        if !(run.dt_pair[0] > run.dt_pair[1]) {
            return Err(Error::config("run.dt_pair", "expected [coarse, fine]"));
        }
        let obs = &self.observables;
        if !(obs.ir.k_ir > 0.0) || obs.ir.points < 3 {
            return Err(Error::config("observables.ir", "k_ir must be positive and points >= 3"));
        }
        let below = self.grid()?.radial_nodes().iter().filter(|&&k| k < obs.ir.k_ir).count();
        if below < obs.ir.points {
            return Err(Error::config(
                "observables.ir.k_ir",
                format!("only {below} shells lie below k_ir = {}; {} needed", obs.ir.k_ir, obs.ir.points),
            ));
        }
        let [a, b] = obs.fit_window;
        if !(a > 0.0 && b > a && b <= run.t_final) {
            return Err(Error::config("observables.fit_window", format!("[{a}, {b}] must lie inside (0, t_final]")));
        }
        if let Some(sp) = &obs.spatial {
            if sp.directions.is_empty() || sp.directions.iter().any(|d| !(Real3::from(*d).norm() > 0.0)) {
                return Err(Error::config("observables.spatial.directions", "need nonzero directions"));
            }
            if sp.radii.is_empty() || sp.radii.windows(2).any(|w| w[1] <= w[0]) || sp.radii[0] <= self.charge.r_phi {
                return Err(Error::config("observables.spatial.radii", "must increase and exceed r_phi"));
            }
            let step = run.dt * run.sample_every as f64;
            for (i, &t) in sp.times.iter().enumerate() {
                let on_snapshot = t >= 0.0 && t <= run.t_final && ((t / step).round() * step - t).abs() < 1e-9 * step.max(1.0);
                if !on_snapshot {
                    return Err(Error::config(
                        format!("observables.spatial.times[{i}]"),
                        format!("{t} is not a forward snapshot time (multiples of {step})"),
                    ));
                }
            }
        }
        let co = &obs.coherent;
        if !(Real3::from(co.v_inf).norm() < 1.0) {
            return Err(Error::config("observables.coherent.v_inf", "must be subluminal"));
        }
        if co.directions == 0 || co.times.is_empty() {
            return Err(Error::config("observables.coherent", "need directions and times"));
        }
        if !(Real3::from(obs.stationarity_v).norm() < 1.0) {
            return Err(Error::config("observables.stationarity_v", "must be subluminal"));
        }
        if !(obs.stationarity_t > 0.0) || steps_for(obs.stationarity_t, run.dt).is_none() {
            return Err(Error::config("observables.stationarity_t", "must be a positive multiple of dt"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ChargeModel> {
        ChargeModel::from_params(self.charge).map_err(config_err("charge"))
    }

    pub fn grid(&self) -> Result<KGrid> {
        KGrid::new(self.grid).map_err(config_err("grid"))
    }

    pub fn v0(&self) -> Real3 {
        Real3::from(self.initial.v0)
    }

    pub fn q0(&self) -> Real3 {
        Real3::from(self.initial.q0)
    }

    /// The reference pulse scenario.
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_TOML).expect("reference scenario is valid")
    }
}

/// Number of steps when `dt` divides `t`.
pub fn steps_for(t: f64, dt: f64) -> Option<usize> {
    let n = (t / dt).round();
    (n >= 1.0 && (n * dt - t).abs() <= 1e-9 * t.abs().max(1.0)).then_some(n as usize)
}

/// Dotted key path of the table entry enclosing byte `offset`.
fn locate_key(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

pub const REFERENCE_TOML: &str = r#"schema = 1
seed = 20240611

[charge]
e = 0.3
m = 1.0
r_phi = 1.0

[grid]
n_radial = 128
k_min = 1e-3
k_max = 8.0
n_polar = 8
n_azimuth = 8
radial = { kind = "log_linear", k_switch = 0.1 }

[initial]
v0 = [0.0, 0.0, 0.0]
q0 = [0.0, 0.0, 0.0]

[initial.pulse]
k0 = 4.5
width = 0.75
amplitude = 30.0
polarization = [1.0, 0.0, 0.0]
direction = [0.0, 0.0, 1.0]
center = [0.0, 0.0, -8.0]

[run]
t_final = 40.0
t_backward = 40.0
dt = 0.02
sample_every = 100
dt_pair = [0.16, 0.08]

[observables]
fit_window = [10.0, 40.0]
ir = { k_ir = 0.05, points = 4 }

[observables.coherent]
v_inf = [0.0, 0.0, 0.5]
directions = 16
times = [0.0, 7.3]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let s = Scenario::reference();
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.hash(), again.hash());
    }

    #[test]
    fn unknown_keys_are_errors_with_their_path() {
        let text = REFERENCE_TOML.replace("r_phi = 1.0", "r_phi = 1.0\nradius = 2.0");
        match Scenario::from_toml_str(&text) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "charge.radius", "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precondition_failures_name_the_key() {
        let text = REFERENCE_TOML.replace("dt = 0.02", "dt = 0.03");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Config { path, .. }) if path == "run.t_final"));
        let text = REFERENCE_TOML.replace("v0 = [0.0, 0.0, 0.0]", "v0 = [0.0, 0.0, 1.2]");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Config { path, .. }) if path == "initial.v0"));
        let text = REFERENCE_TOML.replace("k0 = 4.5", "k0 = 1.0");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Config { path, .. }) if path == "initial.pulse"));
        let text = REFERENCE_TOML.replace("schema = 1", "schema = 2");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Config { path, .. }) if path == "schema"));
    }
}
