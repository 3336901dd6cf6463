use super::Mesh;
use crate::error::{Error, Result};

/// Values on the four sides of the square, sampled at boundary-face midpoints.
///
/// `south`/`north` are indexed by column (`x = (i + 1/2) h`), `west`/`east`
/// by row (`y = (j + 1/2) h`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub south: Vec<f64>,
    pub north: Vec<f64>,
    pub west: Vec<f64>,
    pub east: Vec<f64>,
}

impl BoundaryData {
    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        let n = mesh.n();
        Self {
            south: vec![c; n],
            north: vec![c; n],
            west: vec![c; n],
            east: vec![c; n],
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// Trace of a function of `(x, y)`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = mesh.n();
        let h = mesh.h();
        let at = |k: usize| (k as f64 + 0.5) * h;
        Self {
            south: (0..n).map(|i| f(at(i), 0.0)).collect(),
            north: (0..n).map(|i| f(at(i), 1.0)).collect(),
            west: (0..n).map(|j| f(0.0, at(j))).collect(),
            east: (0..n).map(|j| f(1.0, at(j))).collect(),
        }
    }

    pub fn len_per_side(&self) -> usize {
        self.south.len()
    }

    pub fn sides(&self) -> [&[f64]; 4] {
        [&self.south, &self.north, &self.west, &self.east]
    }

    fn sides_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.south,
            &mut self.north,
            &mut self.west,
            &mut self.east,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.sides().into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for side in out.sides_mut() {
            side.iter_mut().for_each(|x| *x = f(*x));
        }
        out
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &BoundaryData) -> Self {
        let mut out = self.clone();
        for (dst, src) in out.sides_mut().into_iter().zip(other.sides()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += alpha * s);
        }
        out
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.n();
        if self.sides().iter().any(|s| s.len() != n) {
            return Err(Error::MeshMismatch {
                left: n,
                right: self.len_per_side(),
            });
        }
        Ok(())
    }
}

/// Cell-centred scalar with its boundary trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh: Mesh,
    values: Vec<f64>,
    trace: BoundaryData,
}

impl ScalarField {
    pub fn new(mesh: Mesh, values: Vec<f64>, trace: BoundaryData) -> Result<Self> {
        if values.len() != mesh.cells() {
            return Err(Error::Format(format!(
                "expected {} cell values, got {}",
                mesh.cells(),
                values.len()
            )));
        }
        trace.check_mesh(&mesh)?;
        let field = Self {
            mesh,
            values,
            trace,
        };
        field.ensure_finite("ScalarField::new")?;
        Ok(field)
    }

    pub fn zeros(mesh: Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: Mesh, c: f64) -> Self {
        Self {
            mesh,
            values: vec![c; mesh.cells()],
            trace: BoundaryData::constant(&mesh, c),
        }
    }

    /// Samples `f` at cell centres and boundary-face midpoints.
    pub fn from_fn(mesh: Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = mesh.n();
        let mut values = Vec::with_capacity(mesh.cells());
        for j in 0..n {
            for i in 0..n {
                let (x, y) = mesh.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        let trace = BoundaryData::from_fn(&mesh, &f);
        Self {
            mesh,
            values,
            trace,
        }
    }

    /// Cell values with an explicit trace (no finiteness check; internal use).
    pub(crate) fn from_parts(mesh: Mesh, values: Vec<f64>, trace: BoundaryData) -> Self {
        debug_assert_eq!(values.len(), mesh.cells());
        Self {
            mesh,
            values,
            trace,
        }
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn trace(&self) -> &BoundaryData {
        &self.trace
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.cell(i, j)]
    }

    pub fn with_trace(mut self, trace: BoundaryData) -> Result<Self> {
        trace.check_mesh(&self.mesh)?;
        self.trace = trace;
        Ok(self)
    }

    pub fn into_parts(self) -> (Mesh, Vec<f64>, BoundaryData) {
        (self.mesh, self.values, self.trace)
    }

    /// `self + alpha * other`, trace included.
    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> Result<Self> {
        self.mesh.check_same(&other.mesh)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self {
            mesh: self.mesh,
            values,
            trace: self.trace.axpy(alpha, &other.trace),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|x| alpha * x)
    }

    /// Adds a constant to the cell values and the trace.
    pub fn shift(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: self.mesh,
            values: self.values.iter().map(|&x| f(x)).collect(),
            trace: self.trace.map(f),
        }
    }

    /// Discrete L2 inner product (midpoint quadrature).
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.mesh.check_same(&other.mesh)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.mesh.cell_weight())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum::<f64>() * self.mesh.cell_weight()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite()) && self.trace.is_finite()
    }

    pub(crate) fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }
}

/// Staggered velocity: `u` on x-faces, `v` on y-faces, plus tangential wall
/// values (`u` along the south/north walls at `x = i h`, `v` along the
/// west/east walls at `y = j h`).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    mesh: Mesh,
    pub(crate) u: Vec<f64>,
    pub(crate) v: Vec<f64>,
    pub(crate) u_south: Vec<f64>,
    pub(crate) u_north: Vec<f64>,
    pub(crate) v_west: Vec<f64>,
    pub(crate) v_east: Vec<f64>,
}

impl VectorField {
    pub fn zeros(mesh: Mesh) -> Self {
        let n = mesh.n();
        Self {
            mesh,
            u: vec![0.0; mesh.ufaces()],
            v: vec![0.0; mesh.vfaces()],
            u_south: vec![0.0; n + 1],
            u_north: vec![0.0; n + 1],
            v_west: vec![0.0; n + 1],
            v_east: vec![0.0; n + 1],
        }
    }

    /// Face components with zero tangential wall values.
    pub fn from_components(mesh: Mesh, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != mesh.ufaces() || v.len() != mesh.vfaces() {
            return Err(Error::Format(format!(
                "expected {}+{} face values, got {}+{}",
                mesh.ufaces(),
                mesh.vfaces(),
                u.len(),
                v.len()
            )));
        }
        let mut out = Self::zeros(mesh);
        out.u = u;
        out.v = v;
        out.ensure_finite("VectorField::from_components")?;
        Ok(out)
    }

    /// Samples `(fu, fv)` on faces and on the walls.
    pub fn from_fn(mesh: Mesh, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let n = mesh.n();
        let h = mesh.h();
        let mut out = Self::zeros(mesh);
        for j in 0..n {
            for i in 0..=n {
                out.u[mesh.uface(i, j)] = fu(i as f64 * h, (j as f64 + 0.5) * h);
            }
        }
        for j in 0..=n {
            for i in 0..n {
                out.v[mesh.vface(i, j)] = fv((i as f64 + 0.5) * h, j as f64 * h);
            }
        }
        for k in 0..=n {
            let s = k as f64 * h;
            out.u_south[k] = fu(s, 0.0);
            out.u_north[k] = fu(s, 1.0);
            out.v_west[k] = fv(0.0, s);
            out.v_east[k] = fv(1.0, s);
        }
        out
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    #[inline]
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Tangential wall values `(u_south, u_north, v_west, v_east)`.
    pub fn tangential_trace(&self) -> [&[f64]; 4] {
        [&self.u_south, &self.u_north, &self.v_west, &self.v_east]
    }

    pub fn set_tangential_trace(&mut self, trace: [Vec<f64>; 4]) -> Result<()> {
        let n = self.mesh.n();
        if trace.iter().any(|t| t.len() != n + 1) {
            return Err(Error::Format("tangential trace must have n + 1 entries per wall".into()));
        }
        let [s, no, w, e] = trace;
        self.u_south = s;
        self.u_north = no;
        self.v_west = w;
        self.v_east = e;
        Ok(())
    }

    /// Largest normal component on the boundary faces.
    pub fn normal_trace_max(&self) -> f64 {
        let n = self.mesh.n();
        let mut m = 0.0f64;
        for j in 0..n {
            m = m.max(self.u[self.mesh.uface(0, j)].abs());
            m = m.max(self.u[self.mesh.uface(n, j)].abs());
        }
        for i in 0..n {
            m = m.max(self.v[self.mesh.vface(i, 0)].abs());
            m = m.max(self.v[self.mesh.vface(i, n)].abs());
        }
        m
    }

    /// Largest tangential wall value (corners excluded).
    pub fn tangential_trace_max(&self) -> f64 {
        let n = self.mesh.n();
        self.tangential_trace()
            .iter()
            .flat_map(|t| t[1..n].iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &VectorField) -> Result<Self> {
        self.mesh.check_same(&other.mesh)?;
        let comb = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + alpha * y).collect()
        };
        Ok(Self {
            mesh: self.mesh,
            u: comb(&self.u, &other.u),
            v: comb(&self.v, &other.v),
            u_south: comb(&self.u_south, &other.u_south),
            u_north: comb(&self.u_north, &other.u_north),
            v_west: comb(&self.v_west, &other.v_west),
            v_east: comb(&self.v_east, &other.v_east),
        })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let sc = |a: &[f64]| -> Vec<f64> { a.iter().map(|x| alpha * x).collect() };
        Self {
            mesh: self.mesh,
            u: sc(&self.u),
            v: sc(&self.v),
            u_south: sc(&self.u_south),
            u_north: sc(&self.u_north),
            v_west: sc(&self.v_west),
            v_east: sc(&self.v_east),
        }
    }

    /// Discrete L2 inner product: weight `h^2` on interior faces and `h^2/2`
    /// on boundary faces.
    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.mesh.check_same(&other.mesh)?;
        Ok(face_inner(&self.mesh, &self.u, &self.v, &other.u, &other.v))
    }

    pub fn norm_sq(&self) -> f64 {
        face_inner(&self.mesh, &self.u, &self.v, &self.u, &self.v)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.u_south)
            .chain(&self.u_north)
            .chain(&self.v_west)
            .chain(&self.v_east)
            .all(|x| x.is_finite())
    }

    pub(crate) fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }
}

pub(crate) fn face_inner(mesh: &Mesh, au: &[f64], av: &[f64], bu: &[f64], bv: &[f64]) -> f64 {
    let n = mesh.n();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..=n {
            let k = mesh.uface(i, j);
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * au[k] * bu[k];
        }
    }
    for j in 0..=n {
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        for i in 0..n {
            let k = mesh.vface(i, j);
            s += w * av[k] * bv[k];
        }
    }
    s * mesh.cell_weight()
}
