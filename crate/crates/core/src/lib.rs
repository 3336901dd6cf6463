//! Faedo-Galerkin simulation of the Oberbeck-Boussinesq system on the unit
//! square with no-slip walls and the non-local temperature condition
//! `theta|_bdry = theta_b - lambda avg(theta)`.
//!
//! The velocity is expanded in discrete Stokes eigenmodes of a MAC grid; the
//! temperature is solved on the same grid in the lifted variable
//! `Z = theta + lambda avg(theta) - ext(theta_b)`, which carries homogeneous
//! Dirichlet data. Energy ledgers audit the discrete analogues of the
//! mechanical and thermal energy inequalities along every run.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod coupled;
pub mod error;
pub mod heat;
pub mod mesh;
pub mod momentum;
pub mod nonlocal;
pub mod scenario;
pub mod stokes;

pub use error::{Error, Result};
