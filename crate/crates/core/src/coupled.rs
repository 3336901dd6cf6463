//! Lie-split coupling of the heat and momentum solvers, energy ledgers and
//! trajectory diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{step_count, ExtremumMonitor, HeatLedgerRow, HeatSolver, HeatState};
use crate::mesh::{
    avint, div, laplace_dirichlet, vector_laplacian, BoundaryData, Mesh, ScalarField, VectorField,
};
use crate::momentum::{buoyancy_force, buoyancy_load, build_tensor, momentum_step, ConvectionTensor, GalerkinState};
use crate::nonlocal::{shift_reduce, shift_restore, NonlocalParams};
use crate::stokes::{build_basis, StokesBasis};

/// Default `C` of the slack bound `slack <= C dt t` for both ledger
/// inequalities, about three times the worst value seen on the buoyant cell
/// at `dt = 4e-3` on 32^2 and 64^2 meshes.
pub const SLACK_CONSTANT: f64 = 2e-3;

/// Initial and boundary data of one run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub params: NonlocalParams,
    pub potential: ScalarField,
    pub theta_b: BoundaryData,
    pub theta_0: ScalarField,
    pub v_0: VectorField,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        for m in [
            self.potential.mesh(),
            self.theta_0.mesh(),
            self.v_0.mesh(),
        ] {
            self.mesh.check_same(m)?;
        }
        self.theta_b.check_mesh(&self.mesh)?;
        if !self.theta_b.is_finite() {
            return Err(Error::NonFinite("boundary data"));
        }
        self.theta_0.ensure_finite("initial temperature")?;
        self.v_0.ensure_finite("initial velocity")?;
        Ok(())
    }
}

/// Order of the two half-steps within a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitOrder {
    #[default]
    HeatFirst,
    MomentumFirst,
}

/// Whether the velocity evolves or stays at its initial value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityMode {
    #[default]
    Galerkin,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Time between ledger rows; a whole multiple of `dt`.
    pub output_every: f64,
    pub n_modes: usize,
    pub order: SplitOrder,
    pub velocity: VelocityMode,
    pub snapshots: bool,
}

impl RunSettings {
    pub fn steps(&self) -> Result<usize> {
        step_count(self.t_end, self.dt)
    }

    pub fn stride(&self) -> Result<usize> {
        step_count(self.output_every, self.dt).map_err(|_| Error::InvalidParameter {
            name: "output_every",
            reason: format!(
                "output_every {} must be a positive multiple of dt {}",
                self.output_every, self.dt
            ),
        })
    }

    /// Same run with `dt` halved `k` times.
    pub fn refined(&self, k: u32) -> Self {
        Self {
            dt: self.dt / f64::from(1u32 << k),
            ..*self
        }
    }
}

/// Stokes basis with its convection tensor; runs may use any leading prefix.
#[derive(Debug, Clone)]
pub struct GalerkinModel {
    pub basis: StokesBasis,
    pub tensor: ConvectionTensor,
}

impl GalerkinModel {
    pub fn build(mesh: Mesh, n_modes: usize) -> Result<Self> {
        let basis = build_basis(mesh, n_modes)?;
        Self::from_basis(basis)
    }

    pub fn from_basis(basis: StokesBasis) -> Result<Self> {
        let tensor = build_tensor(&basis)?;
        Ok(Self { basis, tensor })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn truncate(&self, n: usize) -> Result<Self> {
        Ok(Self {
            basis: self.basis.truncate(n)?,
            tensor: self.tensor.truncate(n),
        })
    }
}

/// Energy ledger at one output time. Cumulative quantities run from `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    pub kinetic_energy: f64,
    /// `int mu ||grad v||^2`.
    pub viscous_dissipation: f64,
    /// `int <theta grad G, v>`.
    pub buoyancy_work: f64,
    /// Multistep leakage of the convection term.
    pub convection_work: f64,
    /// `KE + viscous_dissipation - KE(0) + buoyancy_work`.
    pub mechanical_slack: f64,
    /// `1/2 (1/(1+lambda)) ||theta + lambda avg(theta) - theta_b||^2`.
    pub heat_quadratic: f64,
    /// `1/2 ||Z(0)||^2`, the initial term of the thermal inequality.
    pub heat_initial: f64,
    /// `int kappa ||grad(theta - theta_b)||^2`.
    pub thermal_dissipation: f64,
    /// `int <theta_b v, grad(theta - theta_b)>`.
    pub boundary_work: f64,
    /// `heat_quadratic + thermal_dissipation - heat_initial - boundary_work`.
    pub thermal_slack: f64,
    /// Same balance with the weighted quadratic `1/2 Q(Z)` on both sides.
    pub weighted_slack: f64,
    pub mean_theta: f64,
    /// Difference quotient of `avg(theta)` over the last output interval.
    pub mean_theta_rate: f64,
    /// `||theta(t) - theta(t - output_every)|| / output_every`.
    pub theta_rate: f64,
    pub boundary_residual: f64,
    pub min_theta: f64,
    pub max_theta: f64,
}

impl LedgerRow {
    pub const HEADER: [&'static str; 18] = [
        "t",
        "kinetic_energy",
        "viscous_dissipation",
        "buoyancy_work",
        "convection_work",
        "mechanical_slack",
        "heat_quadratic",
        "heat_initial",
        "thermal_dissipation",
        "boundary_work",
        "thermal_slack",
        "weighted_slack",
        "mean_theta",
        "mean_theta_rate",
        "theta_rate",
        "boundary_residual",
        "min_theta",
        "max_theta",
    ];

    pub fn record(&self) -> [f64; 18] {
        [
            self.t,
            self.kinetic_energy,
            self.viscous_dissipation,
            self.buoyancy_work,
            self.convection_work,
            self.mechanical_slack,
            self.heat_quadratic,
            self.heat_initial,
            self.thermal_dissipation,
            self.boundary_work,
            self.thermal_slack,
            self.weighted_slack,
            self.mean_theta,
            self.mean_theta_rate,
            self.theta_rate,
            self.boundary_residual,
            self.min_theta,
            self.max_theta,
        ]
    }
}

/// Galerkin coefficients at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub t: f64,
    pub coeffs: Vec<f64>,
    pub kinetic_energy: f64,
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub theta: ScalarField,
    pub velocity: VectorField,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub output_every: f64,
    pub ledger: Vec<LedgerRow>,
    pub heat_rows: Vec<HeatLedgerRow>,
    pub coefficients: Vec<CoefficientRow>,
    pub snapshots: Vec<Snapshot>,
    pub monitor: ExtremumMonitor,
    /// Boundary residual of `theta_0 + lambda avg(theta_0) - theta_b`.
    pub initial_compatibility: f64,
    /// Worst boundary residual of the reconstructed temperature over all steps.
    pub max_boundary_residual: f64,
    pub residual_scale: f64,
    /// Worst `|c . B(c, c)| / |c|^3` over all steps.
    pub max_contraction_ratio: f64,
    pub final_theta: ScalarField,
    pub final_velocity: VectorField,
    pub final_coeffs: Vec<f64>,
}

impl Trajectory {
    pub fn max_mechanical_slack(&self) -> f64 {
        self.ledger.iter().map(|r| r.mechanical_slack).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_thermal_slack(&self) -> f64 {
        self.ledger.iter().map(|r| r.thermal_slack).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Worst `slack / (dt t)` over output times `t > 0`; the inequality
    /// slack model is `slack <= C dt t`.
    pub fn slack_constant(&self, slack: impl Fn(&LedgerRow) -> f64) -> f64 {
        self.ledger
            .iter()
            .filter(|r| r.t > 0.0)
            .map(|r| slack(r) / (self.dt * r.t))
            .fold(0.0, f64::max)
    }
}

/// A run that stopped on a solver error; `trajectory` holds every output
/// time completed before the failure.
#[derive(Debug)]
pub struct PartialRun {
    pub error: Error,
    pub trajectory: Box<Trajectory>,
}

impl std::fmt::Display for PartialRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = self.trajectory.ledger.last().map_or(0.0, |r| r.t);
        write!(f, "{} (last consistent output at t = {t})", self.error)
    }
}

impl std::error::Error for PartialRun {}

struct Accumulator {
    viscous: f64,
    buoyancy: f64,
    convection: f64,
    thermal: f64,
    boundary: f64,
    leakage: f64,
    momentum_dissipation_since_output: f64,
}

/// Runs the coupled system. Returns the partial trajectory on failure.
pub fn run(
    problem: &Problem,
    settings: &RunSettings,
    model: &GalerkinModel,
) -> std::result::Result<Trajectory, PartialRun> {
    let mut state = match Runner::new(problem, settings, model) {
        Ok(s) => s,
        Err(error) => {
            return Err(PartialRun {
                error,
                trajectory: Box::new(empty_trajectory(problem, settings)),
            })
        }
    };
    match state.advance() {
        Ok(()) => Ok(state.finish()),
        Err(error) => Err(PartialRun {
            error,
            trajectory: Box::new(state.finish()),
        }),
    }
}

fn empty_trajectory(problem: &Problem, settings: &RunSettings) -> Trajectory {
    Trajectory {
        dt: settings.dt,
        output_every: settings.output_every,
        ledger: Vec::new(),
        heat_rows: Vec::new(),
        coefficients: Vec::new(),
        snapshots: Vec::new(),
        monitor: ExtremumMonitor::default(),
        initial_compatibility: f64::NAN,
        max_boundary_residual: 0.0,
        residual_scale: 1.0,
        max_contraction_ratio: 0.0,
        final_theta: problem.theta_0.clone(),
        final_velocity: problem.v_0.clone(),
        final_coeffs: Vec::new(),
    }
}

struct Runner<'a> {
    problem: &'a Problem,
    settings: RunSettings,
    model: GalerkinModel,
    heat: HeatSolver,
    steps: usize,
    stride: usize,
    hs: HeatState,
    c: GalerkinState,
    v: VectorField,
    theta: ScalarField,
    last_output_theta: ScalarField,
    ke0: f64,
    heat_initial: f64,
    q0: f64,
    acc: Accumulator,
    traj: Trajectory,
}

impl<'a> Runner<'a> {
    fn new(problem: &'a Problem, settings: &RunSettings, model: &GalerkinModel) -> Result<Self> {
        problem.validate()?;
        let steps = settings.steps()?;
        let stride = settings.stride()?;
        problem.mesh.check_same(model.basis.mesh())?;
        let model = model.truncate(settings.n_modes)?;
        let potential = (problem.params.a != 0.0).then_some(&problem.potential);
        let heat = HeatSolver::new(problem.mesh, &problem.theta_b, problem.params, settings.dt, potential)?;
        let (hs, initial_compatibility) = heat.init(&problem.theta_0)?;
        let theta = heat.reconstruct_theta(&hs);
        let (c, v) = match settings.velocity {
            VelocityMode::Galerkin => {
                let c = model.basis.project(&problem.v_0, settings.n_modes)?;
                let v = model.basis.reconstruct(&c)?;
                (c, v)
            }
            VelocityMode::Frozen => (GalerkinState::zeros(settings.n_modes), problem.v_0.clone()),
        };
        let ke0 = 0.5 * v.norm_sq();
        let heat_initial = 0.5 * hs.z().norm_sq();
        let q0 = heat.quadratic(&hs);
        let mut traj = empty_trajectory(problem, settings);
        traj.initial_compatibility = initial_compatibility;
        traj.residual_scale = heat.residual_scale();
        let mut runner = Self {
            problem,
            settings: *settings,
            model,
            heat,
            steps,
            stride,
            hs,
            c,
            v,
            last_output_theta: theta.clone(),
            theta,
            ke0,
            heat_initial,
            q0,
            acc: Accumulator {
                viscous: 0.0,
                buoyancy: 0.0,
                convection: 0.0,
                thermal: 0.0,
                boundary: 0.0,
                leakage: 0.0,
                momentum_dissipation_since_output: 0.0,
            },
            traj,
        };
        let residual = runner.heat.boundary_residual(&runner.theta);
        runner.traj.max_boundary_residual = residual;
        runner.traj.monitor.update(&runner.theta);
        runner.output(0.0, residual);
        Ok(runner)
    }

    fn advance(&mut self) -> Result<()> {
        for step in 1..=self.steps {
            match self.settings.order {
                SplitOrder::HeatFirst => {
                    self.heat_half()?;
                    self.momentum_half()?;
                }
                SplitOrder::MomentumFirst => {
                    self.momentum_half()?;
                    self.heat_half()?;
                }
            }
            let residual = self.traj.heat_rows.last().map_or(0.0, |r| r.boundary_residual);
            if step % self.stride == 0 {
                self.output(step as f64 * self.settings.dt, residual);
            }
        }
        Ok(())
    }

    fn heat_half(&mut self) -> Result<()> {
        let (next, ledger) = self.heat.step(&self.hs, &self.v)?;
        self.hs = next;
        self.theta = self.heat.reconstruct_theta(&self.hs);
        self.acc.thermal += ledger.dissipation;
        self.acc.boundary += ledger.boundary_work;
        self.acc.leakage += ledger.leakage;
        let row = self.heat.ledger_row(&self.hs, &ledger);
        self.traj.max_boundary_residual = self.traj.max_boundary_residual.max(row.boundary_residual);
        self.traj.monitor.update(&self.theta);
        self.traj.heat_rows.push(row);
        Ok(())
    }

    fn momentum_half(&mut self) -> Result<()> {
        if self.settings.velocity == VelocityMode::Frozen {
            return Ok(());
        }
        let n = self.settings.n_modes;
        let load = buoyancy_load(&self.theta, &self.problem.potential, &self.model.basis, n)?;
        let (next, ledger) = momentum_step(
            &self.c,
            &self.model.tensor,
            self.model.basis.eigenvalues(),
            &load,
            self.problem.params.mu,
            self.settings.dt,
        )?;
        let norm = self.c.norm();
        if norm > 0.0 {
            let ratio = ledger.contraction / norm.powi(3);
            self.traj.max_contraction_ratio = self.traj.max_contraction_ratio.max(ratio);
        }
        self.c = next;
        self.v = self.model.basis.reconstruct(&self.c)?;
        self.acc.viscous += ledger.dissipation;
        self.acc.momentum_dissipation_since_output += ledger.dissipation;
        self.acc.buoyancy -= ledger.buoyancy_work;
        self.acc.convection += ledger.convection_work;
        Ok(())
    }

    fn output(&mut self, t: f64, boundary_residual: f64) {
        let lambda = self.problem.params.lambda.get();
        let ke = 0.5 * self.v.norm_sq();
        let z = self.hs.z();
        let heat_quadratic = 0.5 * z.norm_sq() / (1.0 + lambda);
        let half_q = 0.5 * self.heat.quadratic(&self.hs);
        let mean_theta = avint(&self.theta);
        let (min_theta, max_theta) = self.theta.min_max();
        let (mean_theta_rate, theta_rate) = match self.traj.ledger.last() {
            Some(prev) => {
                let span = t - prev.t;
                let diff = self.theta.sub(&self.last_output_theta).expect("same mesh");
                ((mean_theta - prev.mean_theta) / span, diff.norm() / span)
            }
            None => (0.0, 0.0),
        };
        let acc = &self.acc;
        let row = LedgerRow {
            t,
            kinetic_energy: ke,
            viscous_dissipation: acc.viscous,
            buoyancy_work: acc.buoyancy,
            convection_work: acc.convection,
            mechanical_slack: ke + acc.viscous - self.ke0 + acc.buoyancy,
            heat_quadratic,
            heat_initial: self.heat_initial,
            thermal_dissipation: acc.thermal,
            boundary_work: acc.boundary,
            thermal_slack: heat_quadratic + acc.thermal - self.heat_initial - acc.boundary,
            weighted_slack: half_q + acc.thermal - 0.5 * self.q0 - acc.boundary,
            mean_theta,
            mean_theta_rate,
            theta_rate,
            boundary_residual,
            min_theta,
            max_theta,
        };
        self.traj.ledger.push(row);
        self.traj.coefficients.push(CoefficientRow {
            t,
            coeffs: self.c.coeffs().to_vec(),
            kinetic_energy: ke,
            dissipation: acc.momentum_dissipation_since_output,
        });
        self.acc.momentum_dissipation_since_output = 0.0;
        self.last_output_theta = self.theta.clone();
        if self.settings.snapshots {
            self.traj.snapshots.push(Snapshot {
                t,
                theta: self.theta.clone(),
                velocity: self.v.clone(),
            });
        }
    }

    fn finish(self) -> Trajectory {
        let mut traj = self.traj;
        traj.final_theta = self.theta;
        traj.final_velocity = self.v;
        traj.final_coeffs = self.c.coeffs().to_vec();
        traj
    }
}

/// Runs the problem with `a != 0` through the substitution
/// `theta -> theta + a G` and returns the trajectory in the original
/// variables (temperatures restored by `-a G`).
pub fn run_shifted(
    problem: &Problem,
    settings: &RunSettings,
    model: &GalerkinModel,
) -> std::result::Result<Trajectory, PartialRun> {
    let a = problem.params.a;
    let reduced = (|| -> Result<Problem> {
        let (theta_0, theta_b) = shift_reduce(&problem.theta_0, &problem.theta_b, &problem.potential, a)?;
        let mut params = problem.params;
        params.a = 0.0;
        Ok(Problem {
            theta_0,
            theta_b,
            params,
            ..problem.clone()
        })
    })();
    let reduced = reduced.map_err(|error| PartialRun {
        error,
        trajectory: Box::new(empty_trajectory(problem, settings)),
    })?;
    let mut traj = run(&reduced, settings, model)?;
    let restore = |theta: &ScalarField| -> ScalarField {
        shift_restore(theta, theta.trace(), &problem.potential, a)
            .map(|(t, b)| t.with_trace(b).expect("same mesh"))
            .expect("potential validated by shift_reduce")
    };
    traj.final_theta = restore(&traj.final_theta);
    for s in &mut traj.snapshots {
        s.theta = restore(&s.theta);
    }
    Ok(traj)
}

/// Largest difference of final temperature and velocity between the direct
/// run and the shifted run.
pub fn shift_consistency(problem: &Problem, settings: &RunSettings, model: &GalerkinModel) -> Result<f64> {
    let direct = run(problem, settings, model).map_err(|p| p.error)?;
    let shifted = run_shifted(problem, settings, model).map_err(|p| p.error)?;
    let dtheta = direct.final_theta.sub(&shifted.final_theta)?.max_abs();
    let dv = direct.final_velocity.axpy(-1.0, &shifted.final_velocity)?.max_abs();
    Ok(dtheta.max(dv))
}

/// Suprema of the time-difference quotients of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub sup_mean_rate: f64,
    pub sup_theta_rate: f64,
    pub samples: usize,
}

impl RateReport {
    /// Relative disagreement of both suprema with `other`.
    pub fn relative_change(&self, other: &RateReport) -> f64 {
        let rel = |a: f64, b: f64| {
            let s = a.abs().max(b.abs());
            if s == 0.0 {
                0.0
            } else {
                (a - b).abs() / s
            }
        };
        rel(self.sup_mean_rate, other.sup_mean_rate).max(rel(self.sup_theta_rate, other.sup_theta_rate))
    }
}

/// Difference quotients of `avg(theta)` and of `theta` in L2 over the output
/// times. Needs at least three equally spaced output times.
pub fn dt_theta_diagnostic(traj: &Trajectory) -> Result<RateReport> {
    let rows = &traj.ledger;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 output times, got {}",
            rows.len()
        )));
    }
    let span = rows[1].t - rows[0].t;
    for w in rows.windows(2) {
        if ((w[1].t - w[0].t) - span).abs() > 1e-9 * span {
            return Err(Error::InsufficientData("output times are not uniformly spaced".into()));
        }
    }
    let sup = |f: fn(&LedgerRow) -> f64| rows[1..].iter().map(|r| f(r).abs()).fold(0.0, f64::max);
    Ok(RateReport {
        sup_mean_rate: sup(|r| r.mean_theta_rate),
        sup_theta_rate: sup(|r| r.theta_rate),
        samples: rows.len() - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<usize>,
    /// `||v_{N_i} - v_{N_{i+1}}||` at the final time.
    pub velocity_differences: Vec<f64>,
    /// `||theta_{N_i} - theta_{N_{i+1}}||` at the final time.
    pub theta_differences: Vec<f64>,
    /// Successive ratios of the velocity differences.
    pub velocity_ratios: Vec<f64>,
    pub monotone: bool,
}

/// Runs the problem for every mode count in `n_list` (non-decreasing) on the
/// leading prefixes of one model.
pub fn galerkin_convergence(
    problem: &Problem,
    settings: &RunSettings,
    model: &GalerkinModel,
    n_list: &[usize],
) -> Result<ConvergenceReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("mode counts must be non-decreasing, at least two".into()));
    }
    let mut finals = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let s = RunSettings {
            n_modes: n,
            snapshots: false,
            ..*settings
        };
        let traj = run(problem, &s, model).map_err(|p| p.error)?;
        finals.push((traj.final_velocity, traj.final_theta));
    }
    let mut velocity_differences = Vec::new();
    let mut theta_differences = Vec::new();
    for w in finals.windows(2) {
        velocity_differences.push(w[0].0.axpy(-1.0, &w[1].0)?.norm());
        theta_differences.push(w[0].1.sub(&w[1].1)?.norm());
    }
    let velocity_ratios = velocity_differences
        .windows(2)
        .map(|w| if w[1] == 0.0 { f64::INFINITY } else { w[0] / w[1] })
        .collect();
    let monotone = velocity_differences.windows(2).all(|w| w[1] <= w[0])
        && theta_differences.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceReport {
        n_list: n_list.to_vec(),
        velocity_differences,
        theta_differences,
        velocity_ratios,
        monotone,
    })
}

/// One entry of a compatibility report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityCheck {
    pub name: &'static str,
    pub level: u8,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub level: u8,
    pub checks: Vec<CompatibilityCheck>,
    pub pass: bool,
    pub note: &'static str,
}

const PRESSURE_NOTE: &str = "the boundary pressure condition is checked as vanishing discrete curl of \
-mu Laplace v_0 + theta_0 grad G on the node ring next to the wall";

/// Residuals of the initial-data compatibility conditions up to `level`
/// (1: weak, 2: strong, 3: classical).
pub fn check_compatibility(problem: &Problem, level: u8) -> Result<CompatibilityReport> {
    problem.validate()?;
    let level = level.clamp(1, 3);
    let mesh = problem.mesh;
    let params = problem.params;
    let lambda = params.lambda.get();
    let theta_0 = &problem.theta_0;
    let v_0 = &problem.v_0;
    let mut checks = Vec::new();
    let mut push = |name, lvl, residual: f64, tolerance: f64| {
        checks.push(CompatibilityCheck {
            name,
            level: lvl,
            residual,
            tolerance,
            pass: residual <= tolerance,
        })
    };

    let tscale = problem.theta_b.max_abs().max(theta_0.max_abs()).max(1.0);
    let shift = lambda * avint(theta_0);
    let bres = theta_0
        .trace()
        .iter()
        .zip(problem.theta_b.iter())
        .map(|(t, b)| (t + shift - b).abs())
        .fold(0.0, f64::max);
    push("boundary_condition", 1, bres, 1e-10 * tscale);
    let vscale = v_0.max_abs().max(f64::MIN_POSITIVE);
    push("divergence", 1, div(v_0).max_abs(), 1e-10 * vscale / mesh.h());
    push("normal_trace", 1, v_0.normal_trace_max(), 1e-12 * vscale.max(1.0));

    if level >= 2 {
        push("tangential_trace", 2, v_0.tangential_trace_max(), 1e-12 * vscale.max(1.0));
    }

    if level >= 3 {
        let lap = laplace_dirichlet(theta_0, theta_0.trace())?;
        let mean_lap = avint(&lap);
        let n = mesh.n();
        let mut worst = 0.0f64;
        for k in 0..n {
            for (i, j) in [(k, 0), (k, n - 1), (0, k), (n - 1, k)] {
                worst = worst.max((params.kappa * (lap.at(i, j) + lambda * mean_lap)).abs());
            }
        }
        let lscale = params.kappa * lap.max_abs().max(1.0);
        push("heat_flux_balance", 3, worst, 1e-8 * lscale);

        let force = buoyancy_force(theta_0, &problem.potential)?;
        let visc = vector_laplacian(v_0).scale(-params.mu);
        let total = visc.axpy(1.0, &force)?;
        let (curl, scale) = wall_ring_curl(&total);
        push("pressure_gradient", 3, curl, 1e-8 * scale.max(1.0));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(CompatibilityReport {
        level,
        checks,
        pass,
        note: PRESSURE_NOTE,
    })
}

/// Largest discrete curl of `f` at interior nodes adjacent to the wall, and
/// the scale `max|f| / h` it is compared against.
fn wall_ring_curl(f: &VectorField) -> (f64, f64) {
    let mesh = *f.mesh();
    let n = mesh.n();
    let h = mesh.h();
    let (u, v) = (f.u(), f.v());
    let mut worst = 0.0f64;
    for j in 1..n {
        for i in 1..n {
            if !(i == 1 || j == 1 || i == n - 1 || j == n - 1) {
                continue;
            }
            let dvdx = (v[mesh.vface(i, j)] - v[mesh.vface(i - 1, j)]) / h;
            let dudy = (u[mesh.uface(i, j)] - u[mesh.uface(i, j - 1)]) / h;
            worst = worst.max((dvdx - dudy).abs());
        }
    }
    (worst, f.max_abs() / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::GPreset;

    fn settings(n_modes: usize) -> RunSettings {
        RunSettings {
            dt: 1e-3,
            t_end: 0.02,
            output_every: 0.005,
            n_modes,
            order: SplitOrder::HeatFirst,
            velocity: VelocityMode::Galerkin,
            snapshots: false,
        }
    }

    fn zero_problem(mesh: Mesh) -> Problem {
        Problem {
            mesh,
            params: NonlocalParams::new(1.0, 0.0, 1.0, 1.0).unwrap(),
            potential: GPreset::YLinear.field(mesh),
            theta_b: BoundaryData::zeros(&mesh),
            theta_0: ScalarField::zeros(mesh),
            v_0: VectorField::zeros(mesh),
        }
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let mesh = Mesh::new(8).unwrap();
        let model = GalerkinModel::build(mesh, 4).unwrap();
        let traj = run(&zero_problem(mesh), &settings(4), &model).unwrap();
        assert_eq!(traj.ledger.len(), 5);
        for row in &traj.ledger {
            assert!(row.record().iter().skip(1).all(|x| *x == 0.0), "{row:?}");
        }
        assert_eq!(traj.final_theta.max_abs(), 0.0);
    }

    #[test]
    fn diagnostic_needs_three_outputs() {
        let mesh = Mesh::new(8).unwrap();
        let model = GalerkinModel::build(mesh, 2).unwrap();
        let mut s = settings(2);
        s.output_every = 0.01;
        let traj = run(&zero_problem(mesh), &s, &model).unwrap();
        assert!(dt_theta_diagnostic(&traj).is_ok());
        s.output_every = 0.02;
        let traj = run(&zero_problem(mesh), &s, &model).unwrap();
        assert!(matches!(dt_theta_diagnostic(&traj), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn equal_mode_counts_give_zero_difference() {
        let mesh = Mesh::new(8).unwrap();
        let model = GalerkinModel::build(mesh, 4).unwrap();
        let mut p = zero_problem(mesh);
        p.theta_b = BoundaryData::from_fn(&mesh, |x, _| x);
        let r = galerkin_convergence(&p, &settings(4), &model, &[4, 4]).unwrap();
        assert_eq!(r.velocity_differences, vec![0.0]);
        assert_eq!(r.theta_differences, vec![0.0]);
    }

    #[test]
    fn incompatible_data_fails_level_one() {
        let mesh = Mesh::new(8).unwrap();
        let mut p = zero_problem(mesh);
        p.theta_b = BoundaryData::constant(&mesh, 1.0);
        let r = check_compatibility(&p, 1).unwrap();
        assert!(!r.pass);
        assert!((r.checks[0].residual - 1.0).abs() < 1e-14);
    }

    #[test]
    fn equilibrium_passes_every_level() {
        let mesh = Mesh::new(8).unwrap();
        let mut p = zero_problem(mesh);
        p.theta_b = BoundaryData::constant(&mesh, 2.0);
        p.theta_0 = ScalarField::constant(mesh, 1.0);
        let r = check_compatibility(&p, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.checks.iter().all(|c| c.residual < 1e-12));
    }

    #[test]
    fn bad_output_interval_is_rejected() {
        let mesh = Mesh::new(8).unwrap();
        let model = GalerkinModel::build(mesh, 2).unwrap();
        let mut s = settings(2);
        s.output_every = 0.0015;
        let err = run(&zero_problem(mesh), &s, &model).unwrap_err();
        assert!(matches!(err.error, Error::InvalidParameter { name: "output_every", .. }));
    }
}
