//! Discrete unit-square domain on a MAC (marker-and-cell) layout.
//!
//! Scalars live at cell centres `((i + 1/2) h, (j + 1/2) h)` and carry their
//! boundary trace at the midpoints of the boundary faces. Vector fields store
//! the x-component on vertical faces and the y-component on horizontal faces,
//! plus the tangential wall values needed to impose no-slip by ghost
//! reflection.

mod field;
mod ops;
mod poisson;
mod potential;

pub use field::{BoundaryData, ScalarField, VectorField};
pub use ops::{
    advect_divergence, avint, div, face_average, grad, grad_energy, laplace_dirichlet,
    laplace_homogeneous, vector_laplacian,
};
pub use poisson::{harmonic_extension, DirichletSolver};
pub use potential::{validate_potential, GPreset, PotentialReport};

use crate::error::{Error, Result};

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 8;

/// Square cells on `[0, 1]^2`, `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    n: usize,
    h: f64,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::InvalidMesh(format!(
                "need at least {MIN_CELLS} cells per axis, got {n}"
            )));
        }
        let h = 1.0 / n as f64;
        if h * n as f64 != 1.0 {
            return Err(Error::InvalidMesh(format!(
                "cell width 1/{n} does not multiply back to 1 in floating point"
            )));
        }
        Ok(Self { n, h })
    }

    /// Cells per axis (`nx = ny`).
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of cell-centred unknowns.
    #[inline]
    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    /// Quadrature weight of a cell (midpoint rule).
    #[inline]
    pub fn cell_weight(&self) -> f64 {
        self.h * self.h
    }

    /// Domain measure; always 1 on the unit square.
    #[inline]
    pub fn area(&self) -> f64 {
        1.0
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.h, (j as f64 + 0.5) * self.h)
    }

    /// Index of the x-face at `x = i h`, row `j` (`i` in `0..=n`).
    #[inline]
    pub fn uface(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Index of the y-face at `y = j h`, column `i` (`j` in `0..=n`).
    #[inline]
    pub fn vface(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ufaces(&self) -> usize {
        (self.n + 1) * self.n
    }

    #[inline]
    pub fn vfaces(&self) -> usize {
        self.n * (self.n + 1)
    }

    pub(crate) fn check_same(&self, other: &Mesh) -> Result<()> {
        if self.n != other.n {
            return Err(Error::MeshMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}
