use nalgebra::DMatrix;

use super::field::{BoundaryData, ScalarField};
use super::ops::laplace_dirichlet;
use super::Mesh;
use crate::error::{Error, Result};

/// Direct solver for `(sigma I - tau Laplace_D) x = b` where `Laplace_D` is the
/// cell-centred five-point Laplacian with homogeneous Dirichlet data.
///
/// The 1D ghost-reflected second difference is diagonalised exactly by the
/// sine basis `sin(k pi (i + 1/2) / n)`, so the 2D operator is diagonal after
/// a separable transform in x and y.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    mesh: Mesh,
    basis: DMatrix<f64>,
    eig: Vec<f64>,
}

impl DirichletSolver {
    pub fn new(mesh: Mesh) -> Self {
        let n = mesh.n();
        let nf = n as f64;
        let basis = DMatrix::from_fn(n, n, |k, i| {
            let c = if k + 1 == n { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            c * (std::f64::consts::PI * (k + 1) as f64 * (i as f64 + 0.5) / nf).sin()
        });
        let inv_h2 = 1.0 / (mesh.h() * mesh.h());
        let eig = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k + 1) as f64 / (2.0 * nf)).sin();
                4.0 * inv_h2 * s * s
            })
            .collect();
        Self { mesh, basis, eig }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Eigenvalues of `-Laplace_D` along one axis, ascending.
    pub fn axis_eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    /// Smallest eigenvalue of `-Laplace_D` in 2D.
    pub fn min_eigenvalue(&self) -> f64 {
        2.0 * self.eig[0]
    }

    /// Solves `(sigma I - tau Laplace_D) x = rhs` on raw cell values.
    pub fn solve(&self, sigma: f64, tau: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.mesh.n();
        debug_assert_eq!(rhs.len(), n * n);
        let x = DMatrix::from_row_slice(n, n, rhs);
        let mut modal = &self.basis * x * self.basis.transpose();
        for r in 0..n {
            for c in 0..n {
                modal[(r, c)] /= sigma + tau * (self.eig[r] + self.eig[c]);
            }
        }
        let back = self.basis.transpose() * modal * &self.basis;
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                out.push(back[(r, c)]);
            }
        }
        out
    }
}

/// Harmonic lift of boundary data: solves the discrete Laplace equation with
/// Dirichlet data `theta_b` (ghost-cell imposition).
pub fn harmonic_extension(theta_b: &BoundaryData, solver: &DirichletSolver) -> Result<ScalarField> {
    let mesh = *solver.mesh();
    theta_b.check_mesh(&mesh)?;
    if !theta_b.is_finite() {
        return Err(Error::NonFinite("harmonic_extension input"));
    }
    let n = mesh.n();
    let inv_h2 = 1.0 / (mesh.h() * mesh.h());
    // Moving the ghost contributions 2 g / h^2 to the right-hand side.
    let mut rhs = vec![0.0; mesh.cells()];
    for k in 0..n {
        rhs[mesh.cell(k, 0)] += 2.0 * theta_b.south[k] * inv_h2;
        rhs[mesh.cell(k, n - 1)] += 2.0 * theta_b.north[k] * inv_h2;
        rhs[mesh.cell(0, k)] += 2.0 * theta_b.west[k] * inv_h2;
        rhs[mesh.cell(n - 1, k)] += 2.0 * theta_b.east[k] * inv_h2;
    }
    let values = solver.solve(0.0, 1.0, &rhs);
    let ext = ScalarField::new(mesh, values, theta_b.clone())?;
    let residual = laplace_dirichlet(&ext, theta_b)?.max_abs();
    let scale = theta_b.max_abs().max(f64::MIN_POSITIVE) * inv_h2;
    if residual > 1e-10 * scale {
        return Err(Error::Numerical {
            what: "harmonic extension".into(),
            residual,
        });
    }
    Ok(ext)
}
