//! Comparisons against independent dense computations.

mod common;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use nlboussinesq::heat::{uniqueness_experiment, HeatSolver};
use nlboussinesq::mesh::{laplace_homogeneous, vector_laplacian, BoundaryData, Mesh, ScalarField, VectorField};
use nlboussinesq::momentum::build_tensor;
use nlboussinesq::nonlocal::{theta_to_v, NonlocalParams};
use nlboussinesq::scenario::dirichlet_bump;
use nlboussinesq::stokes::{build_basis, solenoidal_dim, StokesBasis};

/// First eigenvalue of the continuous Stokes operator on the unit square.
const UNIT_SQUARE_FIRST_EIGENVALUE: f64 = 52.344_691;

fn params(lambda: f64, kappa: f64) -> NonlocalParams {
    NonlocalParams::new(lambda, 0.0, kappa, 1.0).unwrap()
}

#[test]
fn heat_step_matches_dense_solve() {
    let mesh = Mesh::new(16).unwrap();
    let mut r = common::rng(7);
    for &lambda in &[0.5, 1.0, 4.0] {
        let dt = 3e-3;
        let kappa = 0.7;
        let solver = HeatSolver::new(mesh, &BoundaryData::zeros(&mesh), params(lambda, kappa), dt, None).unwrap();
        let z = common::random_interior(&mut r, mesh);
        let state = solver.state_from_z(&z, 0.0).unwrap();
        let (next, _) = solver.step(&state, &VectorField::zeros(mesh)).unwrap();

        let alpha = 0.5 * kappa * dt;
        let lap = common::dense_laplacian(&mesh);
        let l = common::dense_mass(&mesh, lambda);
        let lhs = &l - &lap * alpha;
        let rhs = (&l + &lap * alpha) * DVector::from_column_slice(z.values());
        let x = lhs.lu().solve(&rhs).unwrap();
        let err = common::max_abs_diff(next.z().values(), x.as_slice());
        assert!(err <= 1e-11, "lambda {lambda}: {err:e}");
    }
}

#[test]
fn weighted_norm_decays_like_the_dense_pencil() {
    let mesh = Mesh::new(16).unwrap();
    let (lambda, kappa, dt, steps) = (1.0, 0.5, 2e-3, 400);
    let solver = HeatSolver::new(mesh, &BoundaryData::constant(&mesh, 2.0), params(lambda, kappa), dt, None).unwrap();
    let a = ScalarField::constant(mesh, 1.0).with_trace(BoundaryData::constant(&mesh, 1.0)).unwrap();
    let b = a.axpy(0.3, &dirichlet_bump(mesh)).unwrap();
    let rep = uniqueness_experiment(&solver, &a, &b, &VectorField::zeros(mesh), steps as f64 * dt).unwrap();
    assert!(rep.monotone);
    let d0 = theta_to_v(&a.sub(&b).unwrap(), nlboussinesq::nonlocal::Lambda::new(lambda).unwrap());
    let q0 = common::dense_q(&mesh, lambda, &DVector::from_column_slice(d0.values()));
    assert!((q0 - rep.scale).abs() <= 1e-13 * q0, "{q0} vs {}", rep.scale);
    let oracle = common::pencil_decay_rate(&mesh, lambda, kappa, dt, steps, d0.values());
    let rate = rep.final_decay_rate().unwrap();
    assert!((rate - oracle).abs() <= 1e-6 * oracle, "{rate} vs {oracle}");
    let sigma = common::heat_pencil(&mesh, lambda, kappa).sigma;
    assert!((rate - 2.0 * sigma[0]).abs() <= 0.05 * rate, "{rate} vs 2 sigma_1 = {}", 2.0 * sigma[0]);
}

/// Interior-face unknowns (boundary normal faces vanish): u faces with
/// `1 <= i <= n - 1`, then v faces with `1 <= j <= n - 1`.
struct InteriorFaces {
    mesh: Mesh,
    index: Vec<(bool, usize)>,
}

impl InteriorFaces {
    fn new(mesh: Mesh) -> Self {
        let n = mesh.n();
        let mut index = Vec::new();
        for j in 0..n {
            for i in 1..n {
                index.push((true, mesh.uface(i, j)));
            }
        }
        for j in 1..n {
            for i in 0..n {
                index.push((false, mesh.vface(i, j)));
            }
        }
        Self { mesh, index }
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn field(&self, x: &[f64]) -> VectorField {
        let mut u = vec![0.0; self.mesh.ufaces()];
        let mut v = vec![0.0; self.mesh.vfaces()];
        for (&(is_u, k), &val) in self.index.iter().zip(x) {
            if is_u {
                u[k] = val;
            } else {
                v[k] = val;
            }
        }
        VectorField::from_components(self.mesh, u, v).unwrap()
    }

    fn gather(&self, w: &VectorField) -> Vec<f64> {
        self.index
            .iter()
            .map(|&(is_u, k)| if is_u { w.u()[k] } else { w.v()[k] })
            .collect()
    }
}

/// Orthonormal basis of the kernel of the divergence, from an SVD.
fn divergence_kernel(faces: &InteriorFaces) -> DMatrix<f64> {
    let mesh = faces.mesh;
    let m = faces.len();
    let mut d = DMatrix::zeros(mesh.cells(), m);
    let mut e = vec![0.0; m];
    for k in 0..m {
        e[k] = 1.0;
        let col = nlboussinesq::mesh::div(&faces.field(&e));
        d.set_column(k, &DVector::from_column_slice(col.values()));
        e[k] = 0.0;
    }
    let svd = nalgebra::linalg::SVD::new(d.transpose() * &d, true, true);
    let v = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..m).filter(|&k| svd.singular_values[k] <= 1e-10 * smax).collect();
    let mut out = DMatrix::zeros(m, cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &v.column(k));
    }
    out
}

fn dense_stokes_eigenvalues(mesh: Mesh) -> (Vec<f64>, DMatrix<f64>, InteriorFaces) {
    let faces = InteriorFaces::new(mesh);
    let kernel = divergence_kernel(&faces);
    assert_eq!(kernel.ncols(), solenoidal_dim(&mesh));
    let m = faces.len();
    let mut a = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for k in 0..m {
        e[k] = 1.0;
        let col = faces.gather(&vector_laplacian(&faces.field(&e)).scale(-1.0));
        a.set_column(k, &DVector::from_vec(col));
        e[k] = 0.0;
    }
    let reduced = kernel.transpose() * a * &kernel;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(reduced).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    (values, kernel, faces)
}

fn check_against_null_space(mesh: Mesh, n_modes: usize) {
    let basis = build_basis(mesh, n_modes).unwrap();
    let (values, kernel, faces) = dense_stokes_eigenvalues(mesh);
    for k in 0..n_modes {
        let rel = (basis.eigenvalues()[k] - values[k]).abs() / values[k];
        assert!(rel <= 1e-9, "nx {} mode {k}: {} vs {}", mesh.n(), basis.eigenvalues()[k], values[k]);
    }
    for w in basis.modes() {
        let x = DVector::from_vec(faces.gather(w));
        let inside = &kernel * (kernel.transpose() * &x);
        assert!((inside - &x).amax() <= 1e-10 * x.amax());
        assert!(w.normal_trace_max() == 0.0);
    }
}

#[test]
fn stokes_modes_match_svd_null_space_on_small_mesh() {
    check_against_null_space(Mesh::new(8).unwrap(), 20);
}

#[test]
fn iterative_stokes_modes_match_svd_null_space() {
    let mesh = Mesh::new(24).unwrap();
    assert!(solenoidal_dim(&mesh) > 400);
    check_against_null_space(mesh, 8);
}

#[test]
fn full_basis_projection_is_the_leray_projection() {
    let mesh = Mesh::new(8).unwrap();
    let basis = build_basis(mesh, solenoidal_dim(&mesh)).unwrap();
    let faces = InteriorFaces::new(mesh);
    let kernel = divergence_kernel(&faces);
    let mut r = common::rng(3);
    for _ in 0..5 {
        let x: Vec<f64> = (0..faces.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let u = faces.field(&x);
        let projected = basis.reconstruct(&basis.project(&u, basis.len()).unwrap()).unwrap();
        let xv = DVector::from_vec(faces.gather(&u));
        let oracle = &kernel * (kernel.transpose() * xv);
        let err = common::max_abs_diff(&faces.gather(&projected), oracle.as_slice());
        assert!(err <= 1e-11, "{err:e}");
    }
}

/// `<(a . grad) w, z>` with the central advective stencil, written
/// independently of the flux form.
fn advective_form(a: &VectorField, w: &VectorField, z: &VectorField) -> f64 {
    let mesh = *a.mesh();
    let n = mesh.n();
    let h = mesh.h();
    let (au, av, wu, wv) = (a.u(), a.v(), w.u(), w.v());
    let [ws, wn, ww, we] = w.tangential_trace();
    let mut s = 0.0;
    for j in 0..n {
        for i in 1..n {
            let ue = 0.5 * (au[mesh.uface(i, j)] + au[mesh.uface(i + 1, j)]);
            let uw = 0.5 * (au[mesh.uface(i - 1, j)] + au[mesh.uface(i, j)]);
            let vn = 0.5 * (av[mesh.vface(i - 1, j + 1)] + av[mesh.vface(i, j + 1)]);
            let vs = 0.5 * (av[mesh.vface(i - 1, j)] + av[mesh.vface(i, j)]);
            let north = if j + 1 < n { wu[mesh.uface(i, j + 1)] } else { 2.0 * wn[i] - wu[mesh.uface(i, j)] };
            let south = if j > 0 { wu[mesh.uface(i, j - 1)] } else { 2.0 * ws[i] - wu[mesh.uface(i, j)] };
            let adv = (ue * wu[mesh.uface(i + 1, j)] - uw * wu[mesh.uface(i - 1, j)] + vn * north - vs * south) / (2.0 * h);
            s += adv * z.u()[mesh.uface(i, j)];
        }
    }
    for j in 1..n {
        for i in 0..n {
            let vn = 0.5 * (av[mesh.vface(i, j)] + av[mesh.vface(i, j + 1)]);
            let vs = 0.5 * (av[mesh.vface(i, j - 1)] + av[mesh.vface(i, j)]);
            let ue = 0.5 * (au[mesh.uface(i + 1, j - 1)] + au[mesh.uface(i + 1, j)]);
            let uw = 0.5 * (au[mesh.uface(i, j - 1)] + au[mesh.uface(i, j)]);
            let east = if i + 1 < n { wv[mesh.vface(i + 1, j)] } else { 2.0 * we[j] - wv[mesh.vface(i, j)] };
            let west = if i > 0 { wv[mesh.vface(i - 1, j)] } else { 2.0 * ww[j] - wv[mesh.vface(i, j)] };
            let adv = (vn * wv[mesh.vface(i, j + 1)] - vs * wv[mesh.vface(i, j - 1)] + ue * east - uw * west) / (2.0 * h);
            s += adv * z.v()[mesh.vface(i, j)];
        }
    }
    s * mesh.cell_weight()
}

#[test]
fn convection_tensor_matches_advective_quadrature() {
    let basis = build_basis(Mesh::new(12).unwrap(), 8).unwrap();
    let t = build_tensor(&basis).unwrap();
    let modes = basis.modes();
    let n = basis.len();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let raw = advective_form(&modes[i], &modes[j], &modes[k]);
                let swapped = advective_form(&modes[i], &modes[k], &modes[j]);
                let oracle = 0.5 * (raw - swapped);
                assert!(
                    (t.get(i, j, k) - oracle).abs() <= 1e-10 * t.scale(),
                    "({i},{j},{k}): {} vs {oracle}",
                    t.get(i, j, k)
                );
            }
        }
    }
}

#[test]
fn first_eigenvalue_extrapolates_to_the_continuum() {
    let lam = |nx: usize| -> f64 {
        let b: StokesBasis = build_basis(Mesh::new(nx).unwrap(), 1).unwrap();
        b.eigenvalues()[0]
    };
    let (l16, l32, l64) = (lam(16), lam(32), lam(64));
    let order = ((l32 - l16) / (l64 - l32)).log2();
    assert!((order - 2.0).abs() < 0.15, "observed order {order}");
    let r1 = (4.0 * l32 - l16) / 3.0;
    let r2 = (4.0 * l64 - l32) / 3.0;
    assert!((r1 - r2).abs() / r2 < 1e-3, "{r1} vs {r2}");
    assert!((r2 - UNIT_SQUARE_FIRST_EIGENVALUE).abs() / UNIT_SQUARE_FIRST_EIGENVALUE < 1e-3, "{r2}");
}

#[test]
fn dense_laplacian_matches_stencil() {
    let mesh = Mesh::new(8).unwrap();
    let lap = common::dense_laplacian(&mesh);
    assert!((&lap - lap.transpose()).amax() < 1e-9);
    let mut r = common::rng(1);
    let f = common::random_interior(&mut r, mesh);
    let direct = laplace_homogeneous(&mesh, f.values());
    let dense = lap * DVector::from_column_slice(f.values());
    assert!(common::max_abs_diff(&direct, dense.as_slice()) < 1e-9);
}
