//! Strict JSON run configuration.
//!
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected with their key path. After parsing, scenario-dependent
//! defaults are filled in so the canonical echo is fully populated, and
//! parsing the echo yields the same configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupled::{RunSettings, SplitOrder, VelocityMode};
use crate::error::{Error, Result};
use crate::mesh::{GPreset, Mesh};
use crate::nonlocal::{Lambda, NonlocalParams};
use crate::scenario::{ScenarioId, ScenarioKnobs};
use crate::stokes::solenoidal_dim;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub nx: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { nx: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub mu: f64,
    pub kappa: f64,
    pub a: f64,
    pub lambda: Lambda,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            mu: 0.01,
            kappa: 0.01,
            a: 0.0,
            lambda: Lambda::new(1.0).expect("positive"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub modes: usize,
    /// Mode counts for the `converge` verb.
    pub convergence: Vec<usize>,
    /// Directory for cached Stokes bases, keyed by mesh size and mode count.
    pub cache_dir: Option<PathBuf>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            modes: 16,
            convergence: vec![8, 16, 32],
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub output_every: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 2e-3,
            t_end: 2.0,
            output_every: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub boundary_temperature: Option<f64>,
    pub boundary_variation: Option<f64>,
    pub perturbation: Option<f64>,
    pub stream_amplitude: Option<f64>,
    pub potential: Option<GPreset>,
    /// Snapshot file replacing the preset initial temperature.
    pub initial_temperature: Option<PathBuf>,
    /// Snapshot file replacing the preset initial velocity.
    pub initial_velocity: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: ScenarioId::BuoyantCell,
            boundary_temperature: None,
            boundary_variation: None,
            perturbation: None,
            stream_amplitude: None,
            potential: None,
            initial_temperature: None,
            initial_velocity: None,
        }
    }
}

impl ScenarioConfig {
    pub fn knobs(&self) -> ScenarioKnobs {
        ScenarioKnobs {
            boundary_temperature: self.boundary_temperature,
            boundary_variation: self.boundary_variation,
            perturbation: self.perturbation,
            stream_amplitude: self.stream_amplitude,
            potential: self.potential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Run,
    /// Run, then fail if a ledger inequality or the boundary condition is violated.
    Verify,
    Uniqueness,
    Converge,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub mode: Mode,
    pub order: SplitOrder,
    /// Defaults to the scenario's own mode.
    pub velocity: Option<VelocityMode>,
    pub snapshots: bool,
    /// Defaults to the scenario's compatibility level.
    pub compatibility_level: Option<u8>,
    /// Constant `C` of the ledger slack bound `C dt t`.
    pub slack_constant: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Run,
            order: SplitOrder::HeatFirst,
            velocity: None,
            snapshots: true,
            compatibility_level: None,
            slack_constant: crate::coupled::SLACK_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshConfig::default(),
            physics: PhysicsConfig::default(),
            basis: BasisConfig::default(),
            time: TimeConfig::default(),
            scenario: ScenarioConfig::default(),
            run: RunOptions::default(),
            output: None,
        }
        .resolved()
    }
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })?;
        let cfg = raw.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(".", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills scenario-dependent defaults.
    pub fn resolved(mut self) -> Self {
        let id = self.scenario.id;
        let k = self.scenario.knobs().resolved(id);
        self.scenario.boundary_temperature = k.boundary_temperature;
        self.scenario.boundary_variation = k.boundary_variation;
        self.scenario.perturbation = k.perturbation;
        self.scenario.stream_amplitude = k.stream_amplitude;
        self.scenario.potential = k.potential;
        self.run.velocity.get_or_insert(id.velocity_mode());
        self.run.compatibility_level.get_or_insert(id.level());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mesh = Mesh::new(self.mesh.nx).map_err(|e| config_error("mesh.nx", e.to_string()))?;
        let p = &self.physics;
        NonlocalParams::new(p.lambda.get(), p.a, p.kappa, p.mu).map_err(|e| {
            let key = match &e {
                Error::InvalidParameter { name, .. } => format!("physics.{name}"),
                _ => "physics".into(),
            };
            config_error(&key, e.to_string())
        })?;
        let dim = solenoidal_dim(&mesh);
        if self.basis.modes == 0 || self.basis.modes > dim {
            return Err(config_error(
                "basis.modes",
                format!("must be in 1..={dim} for nx = {}", self.mesh.nx),
            ));
        }
        let conv = &self.basis.convergence;
        if conv.iter().any(|&n| n == 0 || n > dim) || conv.windows(2).any(|w| w[1] < w[0]) {
            return Err(config_error(
                "basis.convergence",
                format!("must be non-decreasing mode counts in 1..={dim}"),
            ));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(config_error("time.dt", "dt must be > 0"));
        }
        if !(t.t_end >= t.dt) {
            return Err(config_error("time.t_end", "t_end must be >= dt"));
        }
        let settings = self.settings();
        settings.steps().map_err(|e| config_error("time.t_end", e.to_string()))?;
        settings.stride().map_err(|e| config_error("time.output_every", e.to_string()))?;
        if !matches!(self.run.compatibility_level, Some(1..=3)) {
            return Err(config_error("run.compatibility_level", "must be 1, 2 or 3"));
        }
        if !(self.run.slack_constant >= 0.0) {
            return Err(config_error("run.slack_constant", "must be >= 0"));
        }
        for (key, x) in [
            ("scenario.boundary_temperature", self.scenario.boundary_temperature),
            ("scenario.boundary_variation", self.scenario.boundary_variation),
            ("scenario.perturbation", self.scenario.perturbation),
            ("scenario.stream_amplitude", self.scenario.stream_amplitude),
        ] {
            if !x.is_some_and(f64::is_finite) {
                return Err(config_error(key, "must be a finite number"));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::new(self.mesh.nx)
    }

    pub fn params(&self) -> Result<NonlocalParams> {
        let p = &self.physics;
        NonlocalParams::new(p.lambda.get(), p.a, p.kappa, p.mu)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            dt: self.time.dt,
            t_end: self.time.t_end,
            output_every: self.time.output_every,
            n_modes: self.basis.modes,
            order: self.run.order,
            velocity: self.run.velocity.unwrap_or_default(),
            snapshots: self.run.snapshots,
        }
    }

    /// Pretty JSON with keys in sorted order.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }
}

/// Defaults listed by `--help`.
pub const DEFAULTS_HELP: &str = "\
Config keys (all optional):
  mesh.nx = 32                       cells per axis (>= 8)
  physics.mu = 0.01, physics.kappa = 0.01, physics.a = 0, physics.lambda = 1 (> 0)
  basis.modes = 16, basis.convergence = [8, 16, 32], basis.cache_dir = null
  time.dt = 0.002, time.t_end = 2, time.output_every = 0.02
  scenario.id = buoyant-cell         equilibrium | thermal-decay | buoyant-cell | uniqueness-pair
  scenario.boundary_temperature, boundary_variation, perturbation, stream_amplitude,
  scenario.potential (x-linear | y-linear | saddle): preset-dependent defaults
  scenario.initial_temperature, scenario.initial_velocity: snapshot files overriding the preset
  run.mode = run                     run | verify | uniqueness | converge | check
  run.order = heat-first             heat-first | momentum-first
  run.velocity                       galerkin | frozen (preset default)
  run.snapshots = true, run.compatibility_level (preset default), run.slack_constant
  output = null                      run directory (overridden by --out)";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.scenario.stream_amplitude, Some(0.2));
    }

    #[test]
    fn echo_is_a_fixed_point() {
        let cfg = RunConfig::from_json(r#"{"mesh": {"nx": 16}, "scenario": {"id": "thermal-decay"}}"#).unwrap();
        let echo = cfg.canonical_json();
        let again = RunConfig::from_json(&echo).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo, again.canonical_json());
    }

    #[test]
    fn negative_lambda_is_rejected_with_its_path() {
        let err = RunConfig::from_json(r#"{"physics": {"lambda": -0.5}}"#).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "physics.lambda");
                assert!(message.contains("lambda must be > 0"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"time": {"dt": 0.01, "tend": 1}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "time.tend" || path == "time"), "{err:?}");
    }

    #[test]
    fn unknown_scenario_lists_ids() {
        let err = RunConfig::from_json(r#"{"scenario": {"id": "rayleigh"}}"#).unwrap_err().to_string();
        assert!(err.contains("scenario.id") && err.contains("uniqueness-pair"), "{err}");
    }

    #[test]
    fn too_many_modes_is_a_config_error() {
        let err = RunConfig::from_json(r#"{"mesh": {"nx": 8}, "basis": {"modes": 50}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "basis.modes"));
    }
}
