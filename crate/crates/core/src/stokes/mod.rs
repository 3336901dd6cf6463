//! Discrete Stokes eigenmodes on the MAC grid and the Galerkin projection.
//!
//! On a simply connected domain every discretely solenoidal face field with
//! zero normal trace is the discrete curl of a streamfunction living on the
//! interior grid nodes and vanishing on the boundary, and the curl is
//! injective there. The eigenproblem of the no-slip vector Laplacian
//! restricted to that subspace is therefore the symmetric-definite pencil
//!
//! ```text
//! K psi = lambda M psi,   K = C^T W (-Laplace_h) C,   M = C^T W C
//! ```
//!
//! with `C` the node-to-face curl and `W` the face quadrature weights. Both
//! matrices are banded in lexicographic node order; the lowest modes come from
//! block inverse iteration with a banded Cholesky factor of `K` and a
//! Rayleigh-Ritz step per sweep, which leaves the returned modes exactly
//! orthonormal and the projected Laplacian exactly diagonal up to rounding.

mod band;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{vector_laplacian, Mesh, VectorField};
use crate::momentum::GalerkinState;
use band::SymBand;

/// Problems at most this large are solved densely.
const DENSE_LIMIT: usize = 400;
/// Accepted residual once the iteration stops improving.
const STALL_TOL: f64 = 1e-8;
const STALL_SWEEPS: usize = 5;
const MAX_SWEEPS: usize = 3000;
const RESIDUAL_TOL: f64 = 1e-10;

/// Ordered, orthonormal, discretely solenoidal no-slip eigenmodes.
#[derive(Debug, Clone)]
pub struct StokesBasis {
    mesh: Mesh,
    eigenvalues: Vec<f64>,
    modes: Vec<VectorField>,
}

/// Dimension of the discrete solenoidal no-slip subspace on `mesh`.
pub fn solenoidal_dim(mesh: &Mesh) -> usize {
    let m = mesh.n() - 1;
    m * m
}

/// Lowest `n_modes` eigenpairs of the discrete Stokes operator.
pub fn build_basis(mesh: Mesh, n_modes: usize) -> Result<StokesBasis> {
    let dim = solenoidal_dim(&mesh);
    if n_modes == 0 || n_modes > dim {
        return Err(Error::Capacity {
            requested: n_modes,
            available: dim,
        });
    }
    let stiffness = assemble(&mesh, |psi| {
        let w = curl(&mesh, psi);
        curl_adjoint(&vector_laplacian(&w).scale(-1.0))
    });
    let mass = assemble(&mesh, |psi| curl_adjoint(&curl(&mesh, psi)));

    let block = (2 * n_modes + 8).min(dim);
    let (values, vectors) = if dim <= DENSE_LIMIT || 2 * block >= dim {
        dense_pencil(&stiffness.to_dense(), &mass.to_dense())?
    } else {
        subspace_iteration(&mesh, &stiffness, &mass, n_modes, block)?
    };

    let mut eigenvalues = Vec::with_capacity(n_modes);
    let mut modes = Vec::with_capacity(n_modes);
    for k in 0..n_modes {
        let mut psi: Vec<f64> = vectors.column(k).iter().copied().collect();
        orient(&mut psi);
        eigenvalues.push(values[k]);
        modes.push(curl(&mesh, &psi));
    }
    StokesBasis::from_parts(mesh, eigenvalues, modes)
}

impl StokesBasis {
    /// Wraps precomputed modes (e.g. from the disk cache), re-checking the
    /// basis invariants.
    pub fn from_parts(mesh: Mesh, eigenvalues: Vec<f64>, modes: Vec<VectorField>) -> Result<Self> {
        if eigenvalues.len() != modes.len() || modes.is_empty() {
            return Err(Error::Format("eigenvalue and mode counts differ".into()));
        }
        for m in &modes {
            mesh.check_same(m.mesh())?;
            m.ensure_finite("StokesBasis::from_parts")?;
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) || eigenvalues[0] <= 0.0 {
            return Err(Error::Format("eigenvalues must be positive and non-decreasing".into()));
        }
        let basis = Self {
            mesh,
            eigenvalues,
            modes,
        };
        let defect = basis.orthonormality_defect();
        if defect > 1e-10 {
            return Err(Error::Numerical {
                what: "Stokes basis orthonormality".into(),
                residual: defect,
            });
        }
        Ok(basis)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[VectorField] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> &VectorField {
        &self.modes[k]
    }

    /// The first `n` modes.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::Capacity {
                requested: n,
                available: self.len(),
            });
        }
        Ok(Self {
            mesh: self.mesh,
            eigenvalues: self.eigenvalues[..n].to_vec(),
            modes: self.modes[..n].to_vec(),
        })
    }

    /// Largest `|<w_i, w_j> - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g = self.modes[i].inner(&self.modes[j]).unwrap_or(f64::INFINITY);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `c_k = <u, w_k>` for the first `n` modes.
    pub fn project(&self, u: &VectorField, n: usize) -> Result<GalerkinState> {
        self.mesh.check_same(u.mesh())?;
        if n > self.len() {
            return Err(Error::Capacity {
                requested: n,
                available: self.len(),
            });
        }
        let coeffs = self.modes[..n]
            .iter()
            .map(|w| u.inner(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(GalerkinState::new(coeffs, 0.0))
    }

    /// `sum_k c_k w_k`.
    pub fn reconstruct(&self, state: &GalerkinState) -> Result<VectorField> {
        let c = state.coeffs();
        if c.len() > self.len() {
            return Err(Error::Capacity {
                requested: c.len(),
                available: self.len(),
            });
        }
        let mut u = vec![0.0; self.mesh.ufaces()];
        let mut v = vec![0.0; self.mesh.vfaces()];
        for (ck, w) in c.iter().zip(&self.modes) {
            if *ck == 0.0 {
                continue;
            }
            u.iter_mut().zip(w.u()).for_each(|(a, b)| *a += ck * b);
            v.iter_mut().zip(w.v()).for_each(|(a, b)| *a += ck * b);
        }
        VectorField::from_components(self.mesh, u, v)
    }
}

/// Interior-node index `(i, j)`, `1 <= i, j <= n - 1`.
#[inline]
fn node(m: usize, i: usize, j: usize) -> usize {
    (j - 1) * m + (i - 1)
}

/// Discrete curl of a streamfunction given on interior nodes (zero on the
/// boundary): `u = d psi / dy`, `v = -d psi / dx`.
pub fn curl(mesh: &Mesh, psi: &[f64]) -> VectorField {
    let n = mesh.n();
    let m = n - 1;
    let h = mesh.h();
    debug_assert_eq!(psi.len(), m * m);
    let at = |i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 || i == n || j == n {
            0.0
        } else {
            psi[node(m, i, j)]
        }
    };
    let mut u = vec![0.0; mesh.ufaces()];
    let mut v = vec![0.0; mesh.vfaces()];
    for j in 0..n {
        for i in 1..n {
            u[mesh.uface(i, j)] = (at(i, j + 1) - at(i, j)) / h;
        }
    }
    for j in 1..n {
        for i in 0..n {
            v[mesh.vface(i, j)] = -(at(i + 1, j) - at(i, j)) / h;
        }
    }
    VectorField::from_components(*mesh, u, v).expect("curl of a finite streamfunction")
}

/// `C^T W g` on interior nodes (all faces touched are interior faces).
fn curl_adjoint(g: &VectorField) -> Vec<f64> {
    let mesh = g.mesh();
    let n = mesh.n();
    let m = n - 1;
    let h = mesh.h();
    let (gu, gv) = (g.u(), g.v());
    let mut out = vec![0.0; m * m];
    for j in 1..n {
        for i in 1..n {
            out[node(m, i, j)] = h
                * (gu[mesh.uface(i, j - 1)] - gu[mesh.uface(i, j)] + gv[mesh.vface(i, j)]
                    - gv[mesh.vface(i - 1, j)]);
        }
    }
    out
}

/// Assembles a symmetric node operator whose stencil fits in a 5x5 box by
/// probing with 25 colour classes.
fn assemble(mesh: &Mesh, op: impl Fn(&[f64]) -> Vec<f64>) -> SymBand {
    let m = mesh.n() - 1;
    let dim = m * m;
    let mut band = SymBand::zeros(dim, 2 * m + 2);
    for ci in 0..5 {
        for cj in 0..5 {
            let mut probe = vec![0.0; dim];
            for j in 1..=m {
                for i in 1..=m {
                    if i % 5 == ci && j % 5 == cj {
                        probe[node(m, i, j)] = 1.0;
                    }
                }
            }
            let response = op(&probe);
            for jq in 1..=m {
                for iq in 1..=m {
                    let ip = iq as isize + centered_offset(ci, iq);
                    let jp = jq as isize + centered_offset(cj, jq);
                    if ip < 1 || jp < 1 || ip > m as isize || jp > m as isize {
                        continue;
                    }
                    let q = node(m, iq, jq);
                    let p = node(m, ip as usize, jp as usize);
                    if p <= q {
                        band.set_lower(q, p, response[q]);
                    }
                }
            }
        }
    }
    band
}

/// Offset in `-2..=2` from `k` to the nearest index congruent to `colour` mod 5.
fn centered_offset(colour: usize, k: usize) -> isize {
    let d = (colour as isize - (k % 5) as isize).rem_euclid(5);
    if d > 2 {
        d - 5
    } else {
        d
    }
}

/// Dense symmetric-definite pencil `K x = theta M x`; ascending eigenvalues,
/// `M`-orthonormal eigenvectors.
pub(crate) fn dense_pencil(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = m.clone().cholesky().ok_or_else(|| Error::Numerical {
        what: "mass matrix Cholesky".into(),
        residual: f64::NAN,
    })?;
    let l = chol.l();
    let lk = l.solve_lower_triangular(k).expect("non-singular Cholesky factor");
    let mut c = l
        .solve_lower_triangular(&lk.transpose())
        .expect("non-singular Cholesky factor");
    c = (&c + c.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let sorted = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    let x = l
        .transpose()
        .solve_upper_triangular(&sorted)
        .expect("non-singular Cholesky factor");
    Ok((values, x))
}

fn subspace_iteration(
    mesh: &Mesh,
    stiffness: &SymBand,
    mass: &SymBand,
    wanted: usize,
    block: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = stiffness.dim();
    let factor = stiffness.cholesky()?;
    let mut x = initial_block(mesh, block);
    let mut scratch = vec![0.0; dim];
    let mut worst = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..MAX_SWEEPS {
        let mut y = DMatrix::zeros(dim, block);
        for c in 0..block {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            mass.matvec(&col, &mut scratch);
            factor.solve_in_place(&mut scratch);
            y.column_mut(c).copy_from_slice(&scratch);
        }
        let ky = apply_columns(stiffness, &y);
        let my = apply_columns(mass, &y);
        let kp = y.transpose() * &ky;
        let mp = y.transpose() * &my;
        let (theta, q) = dense_pencil(&((&kp + kp.transpose()) * 0.5), &((&mp + mp.transpose()) * 0.5))?;
        x = &y * &q;
        let kx = ky * &q;
        let mx = my * &q;
        worst = (0..wanted)
            .map(|c| {
                let r = kx.column(c) - mx.column(c) * theta[c];
                r.norm() / (theta[c] * mx.column(c).norm())
            })
            .fold(0.0, f64::max);
        if worst < RESIDUAL_TOL {
            return Ok((theta, x));
        }
        // Rounding floor of the stiffness apply on fine meshes.
        if worst < 0.9 * best {
            best = worst;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_SWEEPS && best < STALL_TOL {
                return Ok((theta, x));
            }
        }
    }
    Err(Error::Numerical {
        what: "Stokes subspace iteration".into(),
        residual: worst,
    })
}

fn apply_columns(op: &SymBand, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    let mut buf = vec![0.0; x.nrows()];
    for c in 0..x.ncols() {
        let col: Vec<f64> = x.column(c).iter().copied().collect();
        op.matvec(&col, &mut buf);
        out.column_mut(c).copy_from_slice(&buf);
    }
    out
}

/// Clamped-plate-like trial streamfunctions `s1(x) s1(y) sk(x) sl(y)` for the
/// lowest `k^2 + l^2`.
fn initial_block(mesh: &Mesh, block: usize) -> DMatrix<f64> {
    let n = mesh.n();
    let m = n - 1;
    let h = mesh.h();
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .flat_map(|k| (1..=m).map(move |l| (k, l)))
        .collect();
    pairs.sort_by_key(|&(k, l)| (k * k + l * l, k));
    let pi = std::f64::consts::PI;
    let mut x = DMatrix::zeros(m * m, block);
    for (c, &(k, l)) in pairs.iter().take(block).enumerate() {
        for j in 1..n {
            for i in 1..n {
                let (xs, ys) = (i as f64 * h, j as f64 * h);
                x[(node(m, i, j), c)] = (pi * xs).sin()
                    * (pi * ys).sin()
                    * (k as f64 * pi * xs).sin()
                    * (l as f64 * pi * ys).sin();
            }
        }
    }
    x
}

/// Fixes the sign so the largest-magnitude entry (first on ties) is positive.
fn orient(psi: &mut [f64]) {
    let mut best = 0usize;
    for (k, v) in psi.iter().enumerate() {
        if v.abs() > psi[best].abs() * (1.0 + 1e-9) {
            best = k;
        }
    }
    if psi[best] < 0.0 {
        psi.iter_mut().for_each(|v| *v = -*v);
    }
}
