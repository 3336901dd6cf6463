//! Temperature transport in the lifted variable `Z = V - ext(theta_b)`.
//!
//! `V = theta + lambda avg(theta)` carries the plain Dirichlet data `theta_b`,
//! so `Z` has homogeneous data and satisfies
//! `d/dt L[Z] + div(v (Z + ext)) = kappa Laplace Z` with `L` the rank-one
//! perturbed mass operator. Diffusion is Crank-Nicolson; advection is
//! Adams-Bashforth 2 with a forward-Euler first step. Each step needs one
//! `(L - alpha Laplace)` solve, done with the spectral Helmholtz solver plus a
//! Sherman-Morrison correction for the averaging term.

use crate::error::{Error, Result};
use crate::mesh::{
    advect_divergence, avint, grad_energy, harmonic_extension, laplace_homogeneous, BoundaryData,
    DirichletSolver, Mesh, ScalarField, VectorField,
};
use crate::nonlocal::{uniqueness_form, NonlocalParams};

/// Relative residual accepted from the linear solve.
pub const SOLVE_TOLERANCE: f64 = 1e-11;

/// Lifted temperature unknown with its multistep history.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    z: ScalarField,
    t: f64,
    history: Option<(Vec<f64>, Vec<f64>)>,
}

impl HeatState {
    pub fn z(&self) -> &ScalarField {
        &self.z
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Drops the advection history so the next step is forward Euler again.
    pub fn reset_history(&mut self) {
        self.history = None;
    }
}

/// Energy bookkeeping for one heat step. With `Zbar` the step midpoint,
/// `(Q(n+1) - Q(n)) / 2 = -dissipation + boundary_work + leakage` to rounding.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatStepLedger {
    /// `kappa dt ||grad Zbar||^2`.
    pub dissipation: f64,
    /// `-dt <div(v ext)*, Zbar>`, the work of the boundary data.
    pub boundary_work: f64,
    /// `-dt <div(v Z)*, Zbar>`, zero for the continuous problem.
    pub leakage: f64,
}

/// Per-step row of the heat ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatLedgerRow {
    pub t: f64,
    pub q: f64,
    pub boundary_residual: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub dissipation: f64,
    pub boundary_work: f64,
}

impl HeatLedgerRow {
    pub const HEADER: [&'static str; 7] = [
        "t",
        "Q",
        "boundary_residual",
        "min_theta",
        "max_theta",
        "dissipation",
        "advection_work",
    ];

    pub fn record(&self) -> [f64; 7] {
        [
            self.t,
            self.q,
            self.boundary_residual,
            self.min_theta,
            self.max_theta,
            self.dissipation,
            self.boundary_work,
        ]
    }
}

/// Fixed-step heat integrator for given boundary data and parameters.
#[derive(Debug, Clone)]
pub struct HeatSolver {
    mesh: Mesh,
    params: NonlocalParams,
    dt: f64,
    alpha: f64,
    dirichlet: DirichletSolver,
    ones_solve: Vec<f64>,
    ones_mass: f64,
    theta_b: BoundaryData,
    ext: ScalarField,
    potential: Option<ScalarField>,
}

impl HeatSolver {
    /// `potential` enables the direct `a div(v G)` transport term; pass `None`
    /// when `a = 0` or after the shift reduction.
    pub fn new(
        mesh: Mesh,
        theta_b: &BoundaryData,
        params: NonlocalParams,
        dt: f64,
        potential: Option<&ScalarField>,
    ) -> Result<Self> {
        Self::with_dirichlet(DirichletSolver::new(mesh), theta_b, params, dt, potential)
    }

    pub fn with_dirichlet(
        dirichlet: DirichletSolver,
        theta_b: &BoundaryData,
        params: NonlocalParams,
        dt: f64,
        potential: Option<&ScalarField>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("dt must be > 0, got {dt}"),
            });
        }
        let mesh = *dirichlet.mesh();
        theta_b.check_mesh(&mesh)?;
        if !theta_b.is_finite() {
            return Err(Error::NonFinite("boundary data"));
        }
        if let Some(g) = potential {
            mesh.check_same(g.mesh())?;
        }
        let alpha = 0.5 * params.kappa * dt;
        let ones_solve = dirichlet.solve(1.0, alpha, &vec![1.0; mesh.cells()]);
        let ones_mass = ones_solve.iter().sum::<f64>() * mesh.cell_weight() / mesh.area();
        let ext = harmonic_extension(theta_b, &dirichlet)?;
        Ok(Self {
            mesh,
            params,
            dt,
            alpha,
            dirichlet,
            ones_solve,
            ones_mass,
            theta_b: theta_b.clone(),
            ext,
            potential: potential.filter(|_| params.a != 0.0).cloned(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &NonlocalParams {
        &self.params
    }

    pub fn theta_b(&self) -> &BoundaryData {
        &self.theta_b
    }

    /// Harmonic extension of the boundary data.
    pub fn extension(&self) -> &ScalarField {
        &self.ext
    }

    pub fn dirichlet(&self) -> &DirichletSolver {
        &self.dirichlet
    }

    /// Builds the initial state and returns it with the boundary residual of
    /// `theta_0 + lambda avg(theta_0) - theta_b`. An incompatible `theta_0` is
    /// accepted; its boundary mismatch is dropped by the lift.
    pub fn init(&self, theta_0: &ScalarField) -> Result<(HeatState, f64)> {
        self.mesh.check_same(theta_0.mesh())?;
        theta_0.ensure_finite("init_heat")?;
        let lambda = self.params.lambda.get();
        let shift = lambda * avint(theta_0);
        let residual = theta_0
            .trace()
            .iter()
            .zip(self.theta_b.iter())
            .map(|(t, b)| (t + shift - b).abs())
            .fold(0.0, f64::max);
        let values = theta_0
            .values()
            .iter()
            .zip(self.ext.values())
            .map(|(t, e)| t + shift - e)
            .collect();
        let z = ScalarField::new(self.mesh, values, BoundaryData::zeros(&self.mesh))?;
        if residual > 1e-12 * self.theta_b.max_abs().max(1.0) {
            log::warn!("initial temperature violates the boundary compatibility by {residual:e}");
        }
        Ok((
            HeatState {
                z,
                t: 0.0,
                history: None,
            },
            residual,
        ))
    }

    /// State with a given lifted unknown; the trace of `z` is ignored.
    pub fn state_from_z(&self, z: &ScalarField, t: f64) -> Result<HeatState> {
        self.mesh.check_same(z.mesh())?;
        z.ensure_finite("state_from_z")?;
        Ok(HeatState {
            z: z.clone().with_trace(BoundaryData::zeros(&self.mesh))?,
            t,
            history: None,
        })
    }

    /// `theta = V - lambda avg(V) / (1 + lambda)` with `V = Z + ext`.
    pub fn reconstruct_theta(&self, state: &HeatState) -> ScalarField {
        let v = state.z.add(&self.ext).expect("mesh checked at construction");
        let v = v.with_trace(self.theta_b.clone()).expect("mesh checked at construction");
        v.shift(-self.params.lambda.mass_weight() * avint(&v))
    }

    /// `max |theta|_bdry + lambda avg(theta) - theta_b|`.
    pub fn boundary_residual(&self, theta: &ScalarField) -> f64 {
        let shift = self.params.lambda.get() * avint(theta);
        theta
            .trace()
            .iter()
            .zip(self.theta_b.iter())
            .map(|(t, b)| (t + shift - b).abs())
            .fold(0.0, f64::max)
    }

    /// Scale for the boundary residual tolerance.
    pub fn residual_scale(&self) -> f64 {
        self.theta_b.max_abs().max(self.ext.max_abs()).max(1.0)
    }

    /// `Q(Z) = <L Z, Z>`, the quadratic that the scheme dissipates.
    pub fn quadratic(&self, state: &HeatState) -> f64 {
        uniqueness_form(&state.z, self.params.lambda)
    }

    /// Largest stable step for `v`, `h / max|v|`.
    pub fn admissible_dt(&self, v: &VectorField) -> f64 {
        let vmax = v.max_abs();
        if vmax == 0.0 {
            f64::INFINITY
        } else {
            self.mesh.h() / vmax
        }
    }

    /// Advances one step with transport velocity `v`.
    pub fn step(&self, state: &HeatState, v: &VectorField) -> Result<(HeatState, HeatStepLedger)> {
        self.mesh.check_same(v.mesh())?;
        let admissible = self.admissible_dt(v);
        if self.dt > admissible {
            return Err(Error::Cfl {
                dt: self.dt,
                admissible,
            });
        }
        let mesh = self.mesh;
        let dt = self.dt;
        let beta = self.params.lambda.mass_weight();

        let adv = advect_divergence(v, &state.z)?.into_parts().1;
        let mut src = advect_divergence(v, &self.ext)?.into_parts().1;
        if let Some(g) = &self.potential {
            let a = self.params.a;
            for (s, x) in src.iter_mut().zip(advect_divergence(v, g)?.values()) {
                *s += a * x;
            }
        }
        let (adv_star, src_star) = match &state.history {
            Some((pa, ps)) => (extrapolate(&adv, pa), extrapolate(&src, ps)),
            None => (adv.clone(), src.clone()),
        };

        let z = state.z.values();
        let lap = laplace_homogeneous(&mesh, z);
        let zmean = avint(&state.z);
        let rhs: Vec<f64> = (0..z.len())
            .map(|k| z[k] - beta * zmean + self.alpha * lap[k] - dt * (adv_star[k] + src_star[k]))
            .collect();

        let x = self.dirichlet.solve(1.0, self.alpha, &rhs);
        let xmean = x.iter().sum::<f64>() * mesh.cell_weight() / mesh.area();
        let denom = 1.0 - beta * self.ones_mass;
        let coef = beta * xmean / denom;
        let next: Vec<f64> = x.iter().zip(&self.ones_solve).map(|(a, y)| a + coef * y).collect();

        let residual = self.solve_residual(&next, &rhs);
        if !(residual <= SOLVE_TOLERANCE) {
            return Err(Error::Numerical {
                what: "heat step linear solve".into(),
                residual,
            });
        }

        let zbar: Vec<f64> = next.iter().zip(z).map(|(a, b)| 0.5 * (a + b)).collect();
        let zbar_field = ScalarField::new(mesh, zbar, BoundaryData::zeros(&mesh))?;
        let w = mesh.cell_weight();
        let dot = |f: &[f64]| -> f64 { f.iter().zip(zbar_field.values()).map(|(a, b)| a * b).sum::<f64>() * w };
        let ledger = HeatStepLedger {
            dissipation: self.params.kappa * dt * grad_energy(&zbar_field),
            boundary_work: -dt * dot(&src_star),
            leakage: -dt * dot(&adv_star),
        };
        let z_next = ScalarField::new(mesh, next, BoundaryData::zeros(&mesh))?;
        Ok((
            HeatState {
                z: z_next,
                t: state.t + dt,
                history: Some((adv, src)),
            },
            ledger,
        ))
    }

    fn solve_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mesh = &self.mesh;
        let beta = self.params.lambda.mass_weight();
        let mean = x.iter().sum::<f64>() * mesh.cell_weight() / mesh.area();
        let lap = laplace_homogeneous(mesh, x);
        let scale = rhs.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for k in 0..x.len() {
            let r = x[k] - beta * mean - self.alpha * lap[k] - rhs[k];
            worst = worst.max(r.abs());
        }
        worst / scale
    }

    /// Ledger row for `state` with the energy terms of the step that produced it.
    pub fn ledger_row(&self, state: &HeatState, step: &HeatStepLedger) -> HeatLedgerRow {
        let theta = self.reconstruct_theta(state);
        let (min_theta, max_theta) = theta.min_max();
        HeatLedgerRow {
            t: state.t,
            q: self.quadratic(state),
            boundary_residual: self.boundary_residual(&theta),
            min_theta,
            max_theta,
            dissipation: step.dissipation,
            boundary_work: step.boundary_work,
        }
    }
}

fn extrapolate(now: &[f64], prev: &[f64]) -> Vec<f64> {
    now.iter().zip(prev).map(|(a, b)| 1.5 * a - 0.5 * b).collect()
}

/// Running bounds of the reconstructed temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumMonitor {
    pub min: f64,
    pub max: f64,
}

impl Default for ExtremumMonitor {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl ExtremumMonitor {
    pub fn update(&mut self, theta: &ScalarField) -> (f64, f64) {
        let (lo, hi) = theta.min_max();
        self.min = self.min.min(lo);
        self.max = self.max.max(hi);
        (lo, hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.min.is_finite() && self.max.is_finite()
    }
}

/// Result of running two heat trajectories under the same velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// `(t, Q(V_a - V_b))` including `t = 0`.
    pub series: Vec<(f64, f64)>,
    /// Largest one-step increase of `Q`.
    pub max_increase: f64,
    /// `Q(0)`, the scale for the monotonicity tolerance.
    pub scale: f64,
    pub monotone: bool,
    /// Largest `|theta_a - theta_b|` over the run.
    pub max_difference: f64,
}

impl UniquenessReport {
    /// `-d/dt ln Q` over the final step.
    pub fn final_decay_rate(&self) -> Option<f64> {
        let [.., (t0, q0), (t1, q1)] = self.series.as_slice() else {
            return None;
        };
        (*q0 > 0.0 && *q1 > 0.0).then(|| -(q1 / q0).ln() / (t1 - t0))
    }
}

/// Runs both initial temperatures to `t_end` under the frozen velocity `v`
/// and tracks the weighted norm of the difference of their `V` variables.
pub fn uniqueness_experiment(
    solver: &HeatSolver,
    theta_a: &ScalarField,
    theta_b: &ScalarField,
    v: &VectorField,
    t_end: f64,
) -> Result<UniquenessReport> {
    let steps = step_count(t_end, solver.dt())?;
    let lambda = solver.params().lambda;
    let (mut sa, _) = solver.init(theta_a)?;
    let (mut sb, _) = solver.init(theta_b)?;
    let q_of = |a: &HeatState, b: &HeatState| uniqueness_form(&a.z.sub(&b.z).expect("same mesh"), lambda);
    let q0 = q_of(&sa, &sb);
    let mut series = vec![(0.0, q0)];
    let mut max_increase = f64::NEG_INFINITY;
    let mut max_difference = solver
        .reconstruct_theta(&sa)
        .sub(&solver.reconstruct_theta(&sb))?
        .max_abs();
    for _ in 0..steps {
        sa = solver.step(&sa, v)?.0;
        sb = solver.step(&sb, v)?.0;
        let q = q_of(&sa, &sb);
        max_increase = max_increase.max(q - series.last().map(|s| s.1).unwrap_or(q0));
        max_difference = max_difference.max(
            solver
                .reconstruct_theta(&sa)
                .sub(&solver.reconstruct_theta(&sb))?
                .max_abs(),
        );
        series.push((sa.t(), q));
    }
    let monotone = max_increase <= 1e-12 * q0.max(f64::MIN_POSITIVE);
    Ok(UniquenessReport {
        series,
        max_increase,
        scale: q0,
        monotone,
        max_difference,
    })
}

/// Number of steps of size `dt` needed to reach `t_end`; `t_end` must be a
/// whole multiple of `dt` up to rounding.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("need t_end >= dt > 0, got t_end {t_end}, dt {dt}"),
        });
    }
    let k = (t_end / dt).round();
    if (k * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("t_end {t_end} is not a multiple of dt {dt}"),
        });
    }
    Ok(k as usize)
}
