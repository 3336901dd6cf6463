//! Second-order staggered stencils.
//!
//! `grad` and `div` are exact negative adjoints of each other for vector fields
//! with vanishing normal trace, and the Dirichlet Laplacian (ghost value
//! `2 g - f` across the wall) equals `div . grad` with the field's trace.

use super::field::{BoundaryData, ScalarField, VectorField};
use super::Mesh;
use crate::error::Result;

/// Domain average `(1/|Omega|) sum_i w_i f_i` by the midpoint rule.
pub fn avint(f: &ScalarField) -> f64 {
    let mesh = f.mesh();
    let s: f64 = f.values().iter().sum();
    s * mesh.cell_weight() / mesh.area()
}

/// Face gradient. Boundary faces use the trace at half-cell distance.
pub fn grad(f: &ScalarField) -> VectorField {
    let mesh = *f.mesh();
    let n = mesh.n();
    let h = mesh.h();
    let t = f.trace();
    let mut out = VectorField::zeros(mesh);
    for j in 0..n {
        out.u[mesh.uface(0, j)] = (f.at(0, j) - t.west[j]) / (0.5 * h);
        for i in 1..n {
            out.u[mesh.uface(i, j)] = (f.at(i, j) - f.at(i - 1, j)) / h;
        }
        out.u[mesh.uface(n, j)] = (t.east[j] - f.at(n - 1, j)) / (0.5 * h);
    }
    for i in 0..n {
        out.v[mesh.vface(i, 0)] = (f.at(i, 0) - t.south[i]) / (0.5 * h);
        for j in 1..n {
            out.v[mesh.vface(i, j)] = (f.at(i, j) - f.at(i, j - 1)) / h;
        }
        out.v[mesh.vface(i, n)] = (t.north[i] - f.at(i, n - 1)) / (0.5 * h);
    }
    out
}

/// Cell divergence of a face field. The result carries a zero trace.
pub fn div(w: &VectorField) -> ScalarField {
    let mesh = *w.mesh();
    let values = div_values(&mesh, &w.u, &w.v);
    ScalarField::from_parts(mesh, values, BoundaryData::zeros(&mesh))
}

pub(crate) fn div_values(mesh: &Mesh, u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = mesh.n();
    let h = mesh.h();
    let mut out = vec![0.0; mesh.cells()];
    for j in 0..n {
        for i in 0..n {
            out[mesh.cell(i, j)] = (u[mesh.uface(i + 1, j)] - u[mesh.uface(i, j)]
                + v[mesh.vface(i, j + 1)]
                - v[mesh.vface(i, j)])
                / h;
        }
    }
    out
}

/// Five-point Laplacian with Dirichlet data `g` imposed through ghost cells.
pub fn laplace_dirichlet(f: &ScalarField, g: &BoundaryData) -> Result<ScalarField> {
    g.check_mesh(f.mesh())?;
    let mesh = *f.mesh();
    let values = laplace_values(&mesh, f.values(), Some(g));
    let out = ScalarField::from_parts(mesh, values, BoundaryData::zeros(&mesh));
    out.ensure_finite("laplace_dirichlet")?;
    Ok(out)
}

/// Laplacian with homogeneous Dirichlet data, acting on raw cell values.
pub fn laplace_homogeneous(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    laplace_values(mesh, values, None)
}

fn laplace_values(mesh: &Mesh, f: &[f64], g: Option<&BoundaryData>) -> Vec<f64> {
    let n = mesh.n();
    let inv_h2 = 1.0 / (mesh.h() * mesh.h());
    let bc = |side: &dyn Fn(&BoundaryData) -> f64| g.map_or(0.0, side);
    let mut out = vec![0.0; mesh.cells()];
    for j in 0..n {
        for i in 0..n {
            let c = f[mesh.cell(i, j)];
            let west = if i > 0 {
                f[mesh.cell(i - 1, j)]
            } else {
                2.0 * bc(&|b| b.west[j]) - c
            };
            let east = if i + 1 < n {
                f[mesh.cell(i + 1, j)]
            } else {
                2.0 * bc(&|b| b.east[j]) - c
            };
            let south = if j > 0 {
                f[mesh.cell(i, j - 1)]
            } else {
                2.0 * bc(&|b| b.south[i]) - c
            };
            let north = if j + 1 < n {
                f[mesh.cell(i, j + 1)]
            } else {
                2.0 * bc(&|b| b.north[i]) - c
            };
            out[mesh.cell(i, j)] = (west + east + south + north - 4.0 * c) * inv_h2;
        }
    }
    out
}

/// `||grad f||^2` in the face inner product; equals `-<f, Laplace f>` when
/// the trace of `f` vanishes.
pub fn grad_energy(f: &ScalarField) -> f64 {
    grad(f).norm_sq()
}

/// Arithmetic face interpolation; boundary faces take the trace.
pub fn face_average(f: &ScalarField) -> VectorField {
    let mesh = *f.mesh();
    let n = mesh.n();
    let t = f.trace();
    let mut out = VectorField::zeros(mesh);
    for j in 0..n {
        out.u[mesh.uface(0, j)] = t.west[j];
        for i in 1..n {
            out.u[mesh.uface(i, j)] = 0.5 * (f.at(i, j) + f.at(i - 1, j));
        }
        out.u[mesh.uface(n, j)] = t.east[j];
    }
    for i in 0..n {
        out.v[mesh.vface(i, 0)] = t.south[i];
        for j in 1..n {
            out.v[mesh.vface(i, j)] = 0.5 * (f.at(i, j) + f.at(i, j - 1));
        }
        out.v[mesh.vface(i, n)] = t.north[i];
    }
    out
}

/// Centred flux-form transport `div(v f)`. Skew-adjoint on zero-trace scalars
/// whenever `v` is discretely solenoidal with zero normal trace.
pub fn advect_divergence(v: &VectorField, f: &ScalarField) -> Result<ScalarField> {
    v.mesh().check_same(f.mesh())?;
    let mesh = *f.mesh();
    let ff = face_average(f);
    let fu: Vec<f64> = v.u.iter().zip(&ff.u).map(|(a, b)| a * b).collect();
    let fv: Vec<f64> = v.v.iter().zip(&ff.v).map(|(a, b)| a * b).collect();
    let values = div_values(&mesh, &fu, &fv);
    Ok(ScalarField::from_parts(mesh, values, BoundaryData::zeros(&mesh)))
}

/// Componentwise Laplacian on interior faces. Normal components on the
/// boundary faces act as Dirichlet data directly; tangential components use
/// ghost reflection about the stored wall values. Boundary faces of the
/// result are zero.
pub fn vector_laplacian(w: &VectorField) -> VectorField {
    let mesh = *w.mesh();
    let n = mesh.n();
    let inv_h2 = 1.0 / (mesh.h() * mesh.h());
    let mut out = VectorField::zeros(mesh);
    for j in 0..n {
        for i in 1..n {
            let c = w.u[mesh.uface(i, j)];
            let west = w.u[mesh.uface(i - 1, j)];
            let east = w.u[mesh.uface(i + 1, j)];
            let south = if j > 0 {
                w.u[mesh.uface(i, j - 1)]
            } else {
                2.0 * w.u_south[i] - c
            };
            let north = if j + 1 < n {
                w.u[mesh.uface(i, j + 1)]
            } else {
                2.0 * w.u_north[i] - c
            };
            out.u[mesh.uface(i, j)] = (west + east + south + north - 4.0 * c) * inv_h2;
        }
    }
    for j in 1..n {
        for i in 0..n {
            let c = w.v[mesh.vface(i, j)];
            let south = w.v[mesh.vface(i, j - 1)];
            let north = w.v[mesh.vface(i, j + 1)];
            let west = if i > 0 {
                w.v[mesh.vface(i - 1, j)]
            } else {
                2.0 * w.v_west[j] - c
            };
            let east = if i + 1 < n {
                w.v[mesh.vface(i + 1, j)]
            } else {
                2.0 * w.v_east[j] - c
            };
            out.v[mesh.vface(i, j)] = (west + east + south + north - 4.0 * c) * inv_h2;
        }
    }
    out
}
