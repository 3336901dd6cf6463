use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use super::ops::{avint, laplace_dirichlet};
use super::Mesh;

/// Gravitational potentials that are mean-free and harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GPreset {
    /// `x - 1/2`
    XLinear,
    /// `y - 1/2`
    YLinear,
    /// `x^2 - y^2` minus its domain average
    Saddle,
}

impl GPreset {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            GPreset::XLinear => x - 0.5,
            GPreset::YLinear => y - 0.5,
            GPreset::Saddle => x * x - y * y,
        }
    }

    pub fn field(self, mesh: Mesh) -> ScalarField {
        let f = ScalarField::from_fn(mesh, |x, y| self.eval(x, y));
        match self {
            GPreset::Saddle => {
                let m = avint(&f);
                f.shift(-m)
            }
            _ => f,
        }
    }

    /// Whether the potential is affine (exactly harmonic for the ghost-cell
    /// stencil, including boundary cells).
    pub fn is_affine(self) -> bool {
        !matches!(self, GPreset::Saddle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub mean: f64,
    /// Max |Laplace G| over cells whose stencil does not touch a ghost value.
    pub laplacian_residual: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Checks that `G` is mean-free and discretely harmonic in the interior.
pub fn validate_potential(g: &ScalarField) -> PotentialReport {
    let mesh = *g.mesh();
    let n = mesh.n();
    let mean = avint(g);
    let lap = laplace_dirichlet(g, g.trace()).expect("trace matches its own mesh");
    let mut residual = 0.0f64;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            residual = residual.max(lap.at(i, j).abs());
        }
    }
    let scale = g.max_abs();
    let pass = mean.abs() <= 1e-10 && residual <= 1e-8 * scale.max(f64::MIN_POSITIVE);
    PotentialReport {
        mean,
        laplacian_residual: residual,
        scale,
        pass,
    }
}
