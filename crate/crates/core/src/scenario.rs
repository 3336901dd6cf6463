//! Preset initial and boundary data.

use serde::{Deserialize, Serialize};

use crate::coupled::{Problem, VelocityMode};
use crate::error::{Error, Result};
use crate::mesh::{avint, harmonic_extension, BoundaryData, DirichletSolver, GPreset, Mesh, ScalarField, VectorField};
use crate::nonlocal::NonlocalParams;
use crate::stokes::curl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Equilibrium,
    ThermalDecay,
    BuoyantCell,
    UniquenessPair,
}

impl ScenarioId {
    pub const ALL: [&'static str; 4] = ["equilibrium", "thermal-decay", "buoyant-cell", "uniqueness-pair"];

    pub fn name(self) -> &'static str {
        match self {
            Self::Equilibrium => Self::ALL[0],
            Self::ThermalDecay => Self::ALL[1],
            Self::BuoyantCell => Self::ALL[2],
            Self::UniquenessPair => Self::ALL[3],
        }
    }

    /// Compatibility level the preset data are built to satisfy.
    pub fn level(self) -> u8 {
        match self {
            Self::Equilibrium => 3,
            Self::BuoyantCell => 2,
            Self::ThermalDecay | Self::UniquenessPair => 1,
        }
    }

    pub fn velocity_mode(self) -> VelocityMode {
        match self {
            Self::Equilibrium | Self::BuoyantCell => VelocityMode::Galerkin,
            Self::ThermalDecay | Self::UniquenessPair => VelocityMode::Frozen,
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equilibrium" => Ok(Self::Equilibrium),
            "thermal-decay" => Ok(Self::ThermalDecay),
            "buoyant-cell" => Ok(Self::BuoyantCell),
            "uniqueness-pair" => Ok(Self::UniquenessPair),
            other => Err(Error::InvalidParameter {
                name: "scenario",
                reason: format!("unknown scenario {other:?}; known: {}", Self::ALL.join(", ")),
            }),
        }
    }
}

/// Tunable knobs of the presets. `None` takes the preset's own default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioKnobs {
    /// Mean boundary temperature `T_B`.
    pub boundary_temperature: Option<f64>,
    /// Amplitude of the `x^2 - y^2` part of the boundary data.
    pub boundary_variation: Option<f64>,
    /// Amplitude of the interior `sin(pi x) sin(pi y)` temperature bump.
    pub perturbation: Option<f64>,
    /// Amplitude of the streamfunction `sin^2(pi x) sin^2(pi y)`.
    pub stream_amplitude: Option<f64>,
    pub potential: Option<GPreset>,
}

impl ScenarioKnobs {
    /// Fills every unset knob with the preset default for `id`.
    pub fn resolved(&self, id: ScenarioId) -> Self {
        let (tb, var, pert, stream) = match id {
            ScenarioId::Equilibrium => (2.0, 0.0, 0.0, 0.0),
            ScenarioId::ThermalDecay => (2.0, 0.5, 0.5, 0.0),
            ScenarioId::BuoyantCell => (1.0, 1.0, 0.5, 0.2),
            ScenarioId::UniquenessPair => (2.0, 0.5, 1e-3, 0.05),
        };
        Self {
            boundary_temperature: Some(self.boundary_temperature.unwrap_or(tb)),
            boundary_variation: Some(self.boundary_variation.unwrap_or(var)),
            perturbation: Some(self.perturbation.unwrap_or(pert)),
            stream_amplitude: Some(self.stream_amplitude.unwrap_or(stream)),
            potential: Some(self.potential.unwrap_or(GPreset::YLinear)),
        }
    }
}

/// Preset data bundle.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub problem: Problem,
    /// Second initial temperature of the uniqueness pair.
    pub twin_theta_0: Option<ScalarField>,
    pub level: u8,
    pub velocity: VelocityMode,
}

/// `sin(pi x) sin(pi y)` at cell centres with zero trace.
pub fn dirichlet_bump(mesh: Mesh) -> ScalarField {
    let pi = std::f64::consts::PI;
    let f = ScalarField::from_fn(mesh, |x, y| (pi * x).sin() * (pi * y).sin());
    f.with_trace(BoundaryData::zeros(&mesh)).expect("same mesh")
}

/// Discrete curl of `amplitude sin^2(pi x) sin^2(pi y)` sampled at interior
/// nodes: solenoidal with no-slip walls.
pub fn cell_flow(mesh: Mesh, amplitude: f64) -> VectorField {
    let n = mesh.n();
    let h = mesh.h();
    let pi = std::f64::consts::PI;
    let mut psi = Vec::with_capacity((n - 1) * (n - 1));
    for j in 1..n {
        for i in 1..n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            psi.push(amplitude * ((pi * x).sin() * (pi * y).sin()).powi(2));
        }
    }
    curl(&mesh, &psi)
}

/// `ext + bump + s` with the constant `s` chosen so that
/// `theta + lambda avg(theta) = theta_b` holds on the boundary.
pub fn compatible_temperature(ext: &ScalarField, bump: &ScalarField, lambda: f64) -> Result<ScalarField> {
    let base = ext.add(bump)?;
    let s = -lambda * avint(&base) / (1.0 + lambda);
    let trace = ext.trace().map(|b| b + s);
    base.shift(s).with_trace(trace)
}

/// `theta + amplitude bump`, shifted by a constant so that the non-local
/// boundary condition of `theta` still holds.
pub fn perturbed_twin(theta: &ScalarField, amplitude: f64, lambda: f64) -> Result<ScalarField> {
    let bump = dirichlet_bump(*theta.mesh()).scale(amplitude);
    let s = -lambda * avint(&bump) / (1.0 + lambda);
    let trace = theta.trace().map(|b| b + s);
    theta.add(&bump)?.shift(s).with_trace(trace)
}

pub fn build_scenario(id: ScenarioId, knobs: &ScenarioKnobs, mesh: Mesh, params: NonlocalParams) -> Result<Scenario> {
    let k = knobs.resolved(id);
    let tb = k.boundary_temperature.unwrap_or_default();
    let var = k.boundary_variation.unwrap_or_default();
    let pert = k.perturbation.unwrap_or_default();
    let stream = k.stream_amplitude.unwrap_or_default();
    let potential = k.potential.unwrap_or(GPreset::YLinear).field(mesh);
    let lambda = params.lambda.get();
    for (name, x) in [
        ("boundary_temperature", tb),
        ("boundary_variation", var),
        ("perturbation", pert),
        ("stream_amplitude", stream),
    ] {
        if !x.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scenario",
                reason: format!("{name} must be finite, got {x}"),
            });
        }
    }

    let theta_b = BoundaryData::from_fn(&mesh, |x, y| tb + var * (x * x - y * y));
    let ext = harmonic_extension(&theta_b, &DirichletSolver::new(mesh))?;
    let bump = dirichlet_bump(mesh);
    let (theta_0, twin, v_0) = match id {
        ScenarioId::Equilibrium => {
            let c = tb / (1.0 + lambda);
            let theta_0 = ScalarField::constant(mesh, c).with_trace(BoundaryData::constant(&mesh, c))?;
            (theta_0, None, VectorField::zeros(mesh))
        }
        ScenarioId::ThermalDecay => (
            compatible_temperature(&ext, &bump.scale(pert), lambda)?,
            None,
            VectorField::zeros(mesh),
        ),
        ScenarioId::BuoyantCell => (
            compatible_temperature(&ext, &bump.scale(pert), lambda)?,
            None,
            cell_flow(mesh, stream),
        ),
        ScenarioId::UniquenessPair => {
            let a = compatible_temperature(&ext, &ScalarField::zeros(mesh), lambda)?;
            let b = perturbed_twin(&a, pert, lambda)?;
            (a, Some(b), cell_flow(mesh, stream))
        }
    };
    Ok(Scenario {
        id,
        problem: Problem {
            mesh,
            params,
            potential,
            theta_b,
            theta_0,
            v_0,
        },
        twin_theta_0: twin,
        level: id.level(),
        velocity: id.velocity_mode(),
    })
}
