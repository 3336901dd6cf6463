#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlboussinesq::mesh::{laplace_homogeneous, BoundaryData, Mesh, ScalarField, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cell values uniform in `[-1, 1]` with a uniform random trace.
pub fn random_field(rng: &mut impl Rng, mesh: Mesh) -> ScalarField {
    let values = (0..mesh.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut side = || (0..mesh.n()).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let trace = BoundaryData {
        south: side(),
        north: side(),
        west: side(),
        east: side(),
    };
    ScalarField::new(mesh, values, trace).unwrap()
}

pub fn random_interior(rng: &mut impl Rng, mesh: Mesh) -> ScalarField {
    let values = (0..mesh.cells()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarField::new(mesh, values, BoundaryData::zeros(&mesh)).unwrap()
}

pub fn random_vector(rng: &mut impl Rng, mesh: Mesh) -> VectorField {
    let u = (0..mesh.ufaces()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = (0..mesh.vfaces()).map(|_| rng.random_range(-1.0..1.0)).collect();
    VectorField::from_components(mesh, u, v).unwrap()
}

/// Homogeneous Dirichlet Laplacian as a dense matrix, column by column.
pub fn dense_laplacian(mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.cells();
    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        let col = laplace_homogeneous(mesh, &e);
        a.set_column(k, &DVector::from_vec(col));
        e[k] = 0.0;
    }
    a
}

/// `I - beta w 1 1^T` with `w` the cell weight over the area.
pub fn dense_mass(mesh: &Mesh, lambda: f64) -> DMatrix<f64> {
    let n = mesh.cells();
    let beta = lambda / (1.0 + lambda);
    let w = mesh.cell_weight() / mesh.area();
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, beta * w)
}

/// Eigenpairs of `kappa (-Laplace) phi = sigma L phi`, ascending, with
/// `L`-orthonormal eigenvectors.
pub struct Pencil {
    pub sigma: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn heat_pencil(mesh: &Mesh, lambda: f64, kappa: f64) -> Pencil {
    let l = dense_mass(mesh, lambda);
    let k = dense_laplacian(mesh) * (-kappa);
    let chol = l.clone().cholesky().expect("mass operator is positive definite");
    let linv = chol.l().try_inverse().unwrap();
    let sym = &linv * k * linv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let back = linv.transpose();
    let sigma = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(l.nrows(), order.len());
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &(&back * eig.eigenvectors.column(i)));
    }
    Pencil { sigma, vectors }
}

/// `Q(x)` in matrix form: `w x^T L x` with `w` the cell weight over the area.
pub fn dense_q(mesh: &Mesh, lambda: f64, x: &DVector<f64>) -> f64 {
    let l = dense_mass(mesh, lambda);
    x.dot(&(l * x)) * mesh.cell_weight() / mesh.area()
}

/// Decay of `Q` over the last of `steps` Crank-Nicolson steps of size `dt`,
/// computed from the modal expansion of `z0` in the pencil.
pub fn pencil_decay_rate(mesh: &Mesh, lambda: f64, kappa: f64, dt: f64, steps: usize, z0: &[f64]) -> f64 {
    let p = heat_pencil(mesh, lambda, kappa);
    let l = dense_mass(mesh, lambda);
    let z0 = DVector::from_column_slice(z0);
    let coeffs = p.vectors.transpose() * (l * z0);
    let q_at = |m: usize| -> f64 {
        let mut q = 0.0;
        for (k, s) in p.sigma.iter().enumerate() {
            let g = (1.0 - 0.5 * dt * s) / (1.0 + 0.5 * dt * s);
            let a = coeffs[k] * g.powi(m as i32);
            q += a * a;
        }
        q * mesh.cell_weight() / mesh.area()
    };
    -(q_at(steps) / q_at(steps - 1)).ln() / dt
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
