//! Galerkin ODE system for the velocity coefficients.
//!
//! `dc_k/dt = -sum_ij b_ijk c_i c_j - mu lambda_k c_k + f_k` with
//! `b_ijk = <div(w_i (x) w_j), w_k>` and `f_k = -<theta grad G, w_k>`.
//! Diffusion is Crank-Nicolson (diagonal), convection and load are
//! Adams-Bashforth 2 with a forward-Euler first step.

use crate::error::{Error, Result};
use crate::mesh::{face_average, grad, Mesh, ScalarField, VectorField};
use crate::stokes::StokesBasis;

/// Coefficients of `v_N` in the Stokes basis at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    coeffs: Vec<f64>,
    t: f64,
    history: Option<(Vec<f64>, Vec<f64>)>,
}

impl GalerkinState {
    pub fn new(coeffs: Vec<f64>, t: f64) -> Self {
        Self {
            coeffs,
            t,
            history: None,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n], 0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `1/2 |c|^2`, which equals `1/2 ||v_N||^2` for an orthonormal basis.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.coeffs.iter().map(|c| c * c).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Keeps the first `n` coefficients and resets the multistep history.
    pub fn truncated(&self, n: usize) -> Self {
        Self::new(self.coeffs[..n.min(self.len())].to_vec(), self.t)
    }
}

/// Dense `N^3` convection tensor, `b[(i * N + j) * N + k]`.
#[derive(Debug, Clone)]
pub struct ConvectionTensor {
    n: usize,
    b: Vec<f64>,
    raw_skew_violation: f64,
    scale: f64,
}

/// Flux-form MAC convection `div(a (x) w)` on interior faces.
///
/// Transport velocities are averaged onto the faces of each momentum control
/// volume and the transported component is averaged arithmetically, so for a
/// discretely solenoidal `a` the bilinear form `<div(a (x) w), z>` is skew in
/// `(w, z)`.
pub fn convect(a: &VectorField, w: &VectorField) -> Result<VectorField> {
    a.mesh().check_same(w.mesh())?;
    let mesh = *a.mesh();
    let n = mesh.n();
    let h = mesh.h();
    let (au, av, wu, wv) = (a.u(), a.v(), w.u(), w.v());
    let [ws, wn, ww, we] = w.tangential_trace();
    let mut cu = vec![0.0; mesh.ufaces()];
    let mut cv = vec![0.0; mesh.vfaces()];

    for j in 0..n {
        for i in 1..n {
            let c = wu[mesh.uface(i, j)];
            let ue = 0.5 * (au[mesh.uface(i, j)] + au[mesh.uface(i + 1, j)]);
            let uw = 0.5 * (au[mesh.uface(i - 1, j)] + au[mesh.uface(i, j)]);
            let fe = 0.5 * (c + wu[mesh.uface(i + 1, j)]);
            let fw = 0.5 * (wu[mesh.uface(i - 1, j)] + c);
            let vn = 0.5 * (av[mesh.vface(i - 1, j + 1)] + av[mesh.vface(i, j + 1)]);
            let vs = 0.5 * (av[mesh.vface(i - 1, j)] + av[mesh.vface(i, j)]);
            let fnorth = if j + 1 < n {
                0.5 * (c + wu[mesh.uface(i, j + 1)])
            } else {
                wn[i]
            };
            let fsouth = if j > 0 {
                0.5 * (wu[mesh.uface(i, j - 1)] + c)
            } else {
                ws[i]
            };
            cu[mesh.uface(i, j)] = (ue * fe - uw * fw + vn * fnorth - vs * fsouth) / h;
        }
    }
    for j in 1..n {
        for i in 0..n {
            let c = wv[mesh.vface(i, j)];
            let vn = 0.5 * (av[mesh.vface(i, j)] + av[mesh.vface(i, j + 1)]);
            let vs = 0.5 * (av[mesh.vface(i, j - 1)] + av[mesh.vface(i, j)]);
            let fn_ = 0.5 * (c + wv[mesh.vface(i, j + 1)]);
            let fs = 0.5 * (wv[mesh.vface(i, j - 1)] + c);
            let ue = 0.5 * (au[mesh.uface(i + 1, j - 1)] + au[mesh.uface(i + 1, j)]);
            let uw = 0.5 * (au[mesh.uface(i, j - 1)] + au[mesh.uface(i, j)]);
            let feast = if i + 1 < n {
                0.5 * (c + wv[mesh.vface(i + 1, j)])
            } else {
                we[j]
            };
            let fwest = if i > 0 {
                0.5 * (wv[mesh.vface(i - 1, j)] + c)
            } else {
                ww[j]
            };
            cv[mesh.vface(i, j)] = (vn * fn_ - vs * fs + ue * feast - uw * fwest) / h;
        }
    }
    VectorField::from_components(mesh, cu, cv)
}

/// Tolerance for the skew pair-sum check, relative to the largest entry.
pub const SKEW_REJECT: f64 = 1e-6;

/// Quadrature evaluation of all `N^3` entries of `<div(w_i (x) w_j), w_k>`.
///
/// The raw tensor is checked for skew-symmetry in `(j, k)`; violations above
/// [`SKEW_REJECT`] times the largest entry are an error. The stored tensor is
/// the skew part, so the convection term does no work exactly.
pub fn build_tensor(basis: &StokesBasis) -> Result<ConvectionTensor> {
    let n = basis.len();
    let modes = basis.modes();
    let mut raw = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let field = convect(&modes[i], &modes[j])?;
            for k in 0..n {
                raw[(i * n + j) * n + k] = field.inner(&modes[k])?;
            }
        }
    }
    let scale = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut violation = 0.0f64;
    let mut b = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = raw[(i * n + j) * n + k];
                let y = raw[(i * n + k) * n + j];
                violation = violation.max((x + y).abs());
                b[(i * n + j) * n + k] = 0.5 * (x - y);
            }
        }
    }
    if violation > SKEW_REJECT * scale.max(1.0) {
        return Err(Error::SkewViolation {
            violation,
            limit: SKEW_REJECT * scale.max(1.0),
        });
    }
    Ok(ConvectionTensor {
        n,
        b,
        raw_skew_violation: violation,
        scale,
    })
}

impl ConvectionTensor {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            b: vec![0.0; n * n * n],
            raw_skew_violation: 0.0,
            scale: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.b[(i * self.n + j) * self.n + k]
    }

    /// Worst `|b_ijk + b_ikj|` of the quadrature values before skew projection.
    pub fn raw_skew_violation(&self) -> f64 {
        self.raw_skew_violation
    }

    /// Largest entry magnitude.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Leading `n x n x n` block (the tensor of the truncated basis).
    pub fn truncate(&self, n: usize) -> Self {
        let n = n.min(self.n);
        let mut b = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    b.push(self.get(i, j, k));
                }
            }
        }
        Self {
            n,
            b,
            raw_skew_violation: self.raw_skew_violation,
            scale: self.scale,
        }
    }

    /// `r_k = sum_ij b_ijk c_i c_j`.
    pub fn contract(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut r = vec![0.0; n];
        for i in 0..n {
            if c[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let cij = c[i] * c[j];
                if cij == 0.0 {
                    continue;
                }
                let row = &self.b[(i * n + j) * n..(i * n + j + 1) * n];
                for (rk, bk) in r.iter_mut().zip(row) {
                    *rk += cij * bk;
                }
            }
        }
        r
    }

    /// `sum_ijk b_ijk c_i c_j c_k`: the work done by convection.
    pub fn work(&self, c: &[f64]) -> f64 {
        self.contract(c).iter().zip(c).map(|(r, ck)| r * ck).sum()
    }
}

/// `f_k = -<theta grad G, w_k>` with `theta` averaged to faces.
pub fn buoyancy_load(theta: &ScalarField, g: &ScalarField, basis: &StokesBasis, n: usize) -> Result<Vec<f64>> {
    let force = buoyancy_force(theta, g)?;
    basis.mesh().check_same(force.mesh())?;
    basis.modes()[..n.min(basis.len())]
        .iter()
        .map(|w| force.inner(w).map(|x| -x))
        .collect()
}

/// `theta grad G` on faces.
pub fn buoyancy_force(theta: &ScalarField, g: &ScalarField) -> Result<VectorField> {
    theta.mesh().check_same(g.mesh())?;
    let mesh: Mesh = *theta.mesh();
    let tf = face_average(theta);
    let gg = grad(g);
    let u = tf.u().iter().zip(gg.u()).map(|(a, b)| a * b).collect();
    let v = tf.v().iter().zip(gg.v()).map(|(a, b)| a * b).collect();
    VectorField::from_components(mesh, u, v)
}

/// Energy bookkeeping for one momentum step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentumStepLedger {
    /// `dt mu sum_k lambda_k cbar_k^2` with `cbar` the Crank-Nicolson midpoint.
    pub dissipation: f64,
    /// Work done by the applied (extrapolated) load: `dt f* . cbar`.
    pub buoyancy_work: f64,
    /// Work done by the extrapolated convection term: `-dt B* . cbar`.
    pub convection_work: f64,
    /// `|c . B(c, c)|` at the start of the step, zero for exact skew-symmetry.
    pub contraction: f64,
}

/// One IMEX step of the Galerkin system.
///
/// `KE(n+1) - KE(n) = -dissipation + buoyancy_work + convection_work` holds to
/// rounding; `convection_work` is the multistep leakage of a term that does no
/// work in the continuous setting.
pub fn momentum_step(
    state: &GalerkinState,
    tensor: &ConvectionTensor,
    eigenvalues: &[f64],
    load: &[f64],
    mu: f64,
    dt: f64,
) -> Result<(GalerkinState, MomentumStepLedger)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("dt must be > 0, got {dt}"),
        });
    }
    let n = state.len();
    if tensor.len() != n || load.len() != n || eigenvalues.len() < n {
        return Err(Error::Precondition(format!(
            "dimension mismatch: state {n}, tensor {}, load {}, eigenvalues {}",
            tensor.len(),
            load.len(),
            eigenvalues.len()
        )));
    }
    let c = &state.coeffs;
    let conv = tensor.contract(c);
    let contraction = conv.iter().zip(c).map(|(r, ck)| r * ck).sum::<f64>().abs();
    let (conv_star, load_star): (Vec<f64>, Vec<f64>) = match &state.history {
        Some((pc, pf)) => (
            conv.iter().zip(pc).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
            load.iter().zip(pf).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
        ),
        None => (conv.clone(), load.to_vec()),
    };
    let mut next = Vec::with_capacity(n);
    let mut ledger = MomentumStepLedger {
        contraction,
        ..Default::default()
    };
    for k in 0..n {
        let a = 0.5 * dt * mu * eigenvalues[k];
        let ck = ((1.0 - a) * c[k] + dt * (load_star[k] - conv_star[k])) / (1.0 + a);
        let mid = 0.5 * (ck + c[k]);
        ledger.dissipation += dt * mu * eigenvalues[k] * mid * mid;
        ledger.buoyancy_work += dt * load_star[k] * mid;
        ledger.convection_work -= dt * conv_star[k] * mid;
        next.push(ck);
    }
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("momentum_step"));
    }
    Ok((
        GalerkinState {
            coeffs: next,
            t: state.t + dt,
            history: Some((conv, load.to_vec())),
        },
        ledger,
    ))
}
