//! Batch driver behind the `nlb` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::artifacts::{self, layout};
use crate::config::{Mode, RunConfig, DEFAULTS_HELP};
use crate::coupled::{
    check_compatibility, dt_theta_diagnostic, galerkin_convergence, run, GalerkinModel, PartialRun, RunSettings,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::heat::{uniqueness_experiment, HeatSolver};
use crate::scenario::{build_scenario, perturbed_twin, Scenario};
use crate::stokes::build_basis;

/// Exit status of a successful invocation.
pub const EXIT_OK: i32 = 0;
/// Invalid configuration, parameters or input data.
pub const EXIT_CONFIG: i32 = 2;
/// Unreadable, unwritable or malformed files.
pub const EXIT_ARTIFACT: i32 = 3;
/// Solver failure or a failed run assertion.
pub const EXIT_NUMERICAL: i32 = 4;

/// Largest relative change of the rate suprema accepted by a dt study.
pub const RATE_STABILITY: f64 = 0.2;

/// Boundary residual tolerance, relative to the residual scale.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "nlb", version, about = "Boussinesq flow with a non-local temperature boundary condition", after_help = DEFAULTS_HELP)]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run directory, overriding `output` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Assert that no random numbers are drawn.
    #[arg(long, global = true)]
    pub seed_free: bool,
    /// Halve dt k times; `run` repeats the run at every level.
    #[arg(long, global = true, value_name = "K")]
    pub dt_study: Option<u32>,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Verb {
    /// Run the coupled system (or whatever `run.mode` asks for).
    Run,
    /// Report initial-data compatibility.
    Check,
    /// Weighted-norm decay of a perturbed temperature pair.
    Uniqueness,
    /// Differences between runs with increasing mode counts.
    Converge,
    /// Plot-ready series from a run directory.
    Plotdata {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
    },
}

/// Why an invocation stopped.
#[derive(Debug)]
pub enum Failure {
    Error(Error),
    /// The computation finished but a checked property failed.
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Error(e.into())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Error(e) => write!(f, "{e}"),
            Self::Assertion(s) => write!(f, "assertion failed: {s}"),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::Capacity { .. }
        | Error::Precondition(_)
        | Error::InvalidMesh(_)
        | Error::MeshMismatch { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Format(_) => EXIT_ARTIFACT,
        Error::Numerical { .. }
        | Error::Cfl { .. }
        | Error::SkewViolation { .. }
        | Error::InsufficientData(_)
        | Error::NonFinite(_) => EXIT_NUMERICAL,
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Error(e) => exit_code(e),
            Self::Assertion(_) => EXIT_NUMERICAL,
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the verb and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("nlb: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Outcome {
    if let Verb::Plotdata { dir } = &cli.verb {
        let dir = dir
            .clone()
            .or_else(|| cli.out.clone())
            .ok_or_else(|| Error::Precondition("plotdata needs a run directory".into()))?;
        let summary = artifacts::emit_plotdata(&dir)?;
        log::info!("plot series with {} rows written to {}", summary.rows, dir.display());
        return Ok(());
    }

    let cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let base = cli.config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("nlb-run"));
    let mode = match cli.verb {
        Verb::Run => cfg.run.mode,
        Verb::Check => Mode::Check,
        Verb::Uniqueness => Mode::Uniqueness,
        Verb::Converge => Mode::Converge,
        Verb::Plotdata { .. } => unreachable!("handled above"),
    };
    let ctx = Context {
        cfg,
        base: base.to_path_buf(),
        out,
        seed_free: cli.seed_free,
        dt_study: cli.dt_study,
    };
    fs::create_dir_all(&ctx.out)?;
    fs::write(ctx.out.join(layout::CONFIG), ctx.cfg.canonical_json())?;
    match mode {
        Mode::Run | Mode::Verify => match ctx.dt_study {
            Some(k) => ctx.dt_study(k, mode == Mode::Verify),
            None => ctx.run(mode == Mode::Verify),
        },
        Mode::Check => ctx.check(),
        Mode::Uniqueness => ctx.uniqueness(),
        Mode::Converge => ctx.converge(),
    }
}

struct Context {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    seed_free: bool,
    dt_study: Option<u32>,
}

impl Context {
    fn scenario(&self) -> Result<Scenario> {
        let cfg = &self.cfg;
        let mesh = cfg.mesh()?;
        let mut s = build_scenario(cfg.scenario.id, &cfg.scenario.knobs(), mesh, cfg.params()?)?;
        if let Some(p) = &cfg.scenario.initial_temperature {
            let (theta, _) = artifacts::read_scalar(&self.base.join(p))?;
            mesh.check_same(theta.mesh())?;
            s.problem.theta_0 = theta;
        }
        if let Some(p) = &cfg.scenario.initial_velocity {
            let (v, _) = artifacts::read_vector(&self.base.join(p))?;
            mesh.check_same(v.mesh())?;
            s.problem.v_0 = v;
        }
        s.problem.validate()?;
        Ok(s)
    }

    fn settings(&self) -> RunSettings {
        let s = self.cfg.settings();
        match self.dt_study {
            Some(k) => s.refined(k),
            None => s,
        }
    }

    /// Loads the basis from the cache directory when present, else builds
    /// and stores it.
    fn model(&self, n_modes: usize) -> Result<GalerkinModel> {
        let mesh = self.cfg.mesh()?;
        let Some(dir) = &self.cfg.basis.cache_dir else {
            return GalerkinModel::build(mesh, n_modes);
        };
        let dir = self.base.join(dir);
        let path = artifacts::basis_cache_path(&dir, mesh.n(), n_modes);
        if path.is_file() {
            log::info!("loading Stokes basis from {}", path.display());
            return GalerkinModel::from_basis(artifacts::read_basis(&path)?);
        }
        let basis = build_basis(mesh, n_modes)?;
        fs::create_dir_all(&dir)?;
        artifacts::write_basis(&path, &basis)?;
        GalerkinModel::from_basis(basis)
    }

    fn common_report(&self, verb: &str, s: &Scenario) -> Value {
        json!({
            "verb": verb,
            "scenario": s.id.name(),
            "nx": self.cfg.mesh.nx,
            "seed_free": self.seed_free,
        })
    }

    fn run(&self, verify: bool) -> Outcome {
        let s = self.scenario()?;
        let settings = self.settings();
        let model = self.model(settings.n_modes)?;
        let level = self.cfg.run.compatibility_level.unwrap_or(s.level);
        let compat = check_compatibility(&s.problem, level)?;
        for c in compat.checks.iter().filter(|c| !c.pass) {
            log::warn!("compatibility {} fails: residual {:e} > {:e}", c.name, c.residual, c.tolerance);
        }
        let result = run(&s.problem, &settings, &model);
        let mut report = self.common_report(if verify { "verify" } else { "run" }, &s);
        report["compatibility"] = serde_json::to_value(&compat).map_err(format_err)?;
        report["basis"] = json!({
            "modes": settings.n_modes,
            "eigenvalues": model.basis.eigenvalues()[..settings.n_modes],
            "skew_violation": model.tensor.raw_skew_violation(),
        });
        match result {
            Ok(traj) => {
                let verdict = self.verdict(&traj);
                report["status"] = json!("complete");
                report["diagnostics"] = diagnostics(&traj);
                report["verification"] = verdict.to_json();
                artifacts::write_trajectory(&self.out, &traj)?;
                artifacts::write_json(&self.out.join(layout::REPORT), &report)?;
                if verify && !verdict.pass() {
                    return Err(Failure::Assertion(verdict.summary()));
                }
                Ok(())
            }
            Err(PartialRun { error, trajectory }) => {
                report["status"] = json!("partial");
                report["error"] = json!(error.to_string());
                report["diagnostics"] = diagnostics(&trajectory);
                artifacts::write_trajectory(&self.out, &trajectory)?;
                artifacts::write_json(&self.out.join(layout::REPORT), &report)?;
                Err(error.into())
            }
        }
    }

    fn verdict(&self, traj: &Trajectory) -> Verdict {
        Verdict {
            mechanical: traj.slack_constant(|r| r.mechanical_slack),
            thermal: traj.slack_constant(|r| r.thermal_slack),
            limit: self.cfg.run.slack_constant,
            boundary: traj.max_boundary_residual / traj.residual_scale,
            bounded: traj.monitor.is_bounded(),
        }
    }

    fn dt_study(&self, k: u32, verify: bool) -> Outcome {
        let s = self.scenario()?;
        let base = self.cfg.settings();
        let model = self.model(base.n_modes)?;
        let mut levels = Vec::new();
        let mut rates = Vec::new();
        let mut failure = None;
        for i in 0..=k {
            let settings = base.refined(i);
            let dir = self.out.join(format!("level_{i}"));
            let traj = match run(&s.problem, &settings, &model) {
                Ok(t) => t,
                Err(PartialRun { error, trajectory }) => {
                    artifacts::write_trajectory(&dir, &trajectory)?;
                    return Err(error.into());
                }
            };
            artifacts::write_trajectory(&dir, &traj)?;
            let rate = dt_theta_diagnostic(&traj)?;
            let verdict = self.verdict(&traj);
            if verify && !verdict.pass() && failure.is_none() {
                failure = Some(format!("dt = {:e}: {}", settings.dt, verdict.summary()));
            }
            levels.push(json!({
                "dt": settings.dt,
                "directory": format!("level_{i}"),
                "rates": rate,
                "diagnostics": diagnostics(&traj),
                "verification": verdict.to_json(),
            }));
            rates.push(rate);
        }
        let changes: Vec<f64> = rates.windows(2).map(|w| w[0].relative_change(&w[1])).collect();
        let stable = changes.iter().all(|c| *c <= RATE_STABILITY);
        let mut report = self.common_report("dt-study", &s);
        report["levels"] = Value::Array(levels);
        report["rate_relative_changes"] = json!(changes);
        report["rate_tolerance"] = json!(RATE_STABILITY);
        report["rates_stable"] = json!(stable);
        artifacts::write_json(&self.out.join(layout::REPORT), &report)?;
        if !stable {
            return Err(Failure::Assertion(format!(
                "rate suprema changed by {changes:?} under dt halving (limit {RATE_STABILITY})"
            )));
        }
        failure.map_or(Ok(()), |f| Err(Failure::Assertion(f)))
    }

    fn check(&self) -> Outcome {
        let s = self.scenario()?;
        let level = self.cfg.run.compatibility_level.unwrap_or(s.level);
        let compat = check_compatibility(&s.problem, level)?;
        for c in &compat.checks {
            println!(
                "{:<20} level {}  residual {:.3e}  tolerance {:.3e}  {}",
                c.name,
                c.level,
                c.residual,
                c.tolerance,
                if c.pass { "pass" } else { "warn" }
            );
        }
        let mut report = self.common_report("check", &s);
        report["compatibility"] = serde_json::to_value(&compat).map_err(format_err)?;
        artifacts::write_json(&self.out.join(layout::REPORT), &report)?;
        Ok(())
    }

    fn uniqueness(&self) -> Outcome {
        let s = self.scenario()?;
        let settings = self.settings();
        let p = &s.problem;
        let twin = match &s.twin_theta_0 {
            Some(t) => t.clone(),
            None => {
                let amp = match self.cfg.scenario.perturbation {
                    Some(x) if x != 0.0 => x,
                    _ => 1e-3,
                };
                perturbed_twin(&p.theta_0, amp, p.params.lambda.get())?
            }
        };
        let potential = (p.params.a != 0.0).then_some(&p.potential);
        let solver = HeatSolver::new(p.mesh, &p.theta_b, p.params, settings.dt, potential)?;
        let rep = uniqueness_experiment(&solver, &p.theta_0, &twin, &p.v_0, settings.t_end)?;
        let path = self.out.join("uniqueness.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Format(e.to_string()))?;
        w.write_record(["t", "q"]).map_err(|e| Error::Format(e.to_string()))?;
        for (t, q) in &rep.series {
            w.write_record([format!("{t:?}"), format!("{q:?}")])
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        let mut report = self.common_report("uniqueness", &s);
        report["uniqueness"] = json!({
            "steps": rep.series.len().saturating_sub(1),
            "initial_q": rep.scale,
            "final_q": rep.series.last().map(|x| x.1),
            "max_increase": rep.max_increase,
            "monotone": rep.monotone,
            "max_difference": rep.max_difference,
            "final_decay_rate": rep.final_decay_rate(),
        });
        artifacts::write_json(&self.out.join(layout::REPORT), &report)?;
        if !rep.monotone {
            return Err(Failure::Assertion(format!(
                "weighted norm increased by {:e} in one step",
                rep.max_increase
            )));
        }
        Ok(())
    }

    fn converge(&self) -> Outcome {
        let s = self.scenario()?;
        let settings = self.settings();
        let n_list = &self.cfg.basis.convergence;
        let n_max = n_list.iter().copied().max().unwrap_or(settings.n_modes);
        let model = self.model(n_max)?;
        let rep = galerkin_convergence(&s.problem, &settings, &model, n_list)?;
        let mut report = self.common_report("converge", &s);
        report["convergence"] = serde_json::to_value(&rep).map_err(format_err)?;
        artifacts::write_json(&self.out.join(layout::REPORT), &report)?;
        if !rep.monotone {
            return Err(Failure::Assertion(format!(
                "differences do not decrease: velocity {:?}, temperature {:?}",
                rep.velocity_differences, rep.theta_differences
            )));
        }
        Ok(())
    }
}

struct Verdict {
    mechanical: f64,
    thermal: f64,
    limit: f64,
    boundary: f64,
    bounded: bool,
}

impl Verdict {
    fn pass(&self) -> bool {
        self.mechanical <= self.limit && self.thermal <= self.limit && self.boundary <= BOUNDARY_TOLERANCE && self.bounded
    }

    fn summary(&self) -> String {
        format!(
            "slack constants {:e} (mechanical), {:e} (thermal) vs {:e}; boundary residual {:e}; bounded {}",
            self.mechanical, self.thermal, self.limit, self.boundary, self.bounded
        )
    }

    fn to_json(&self) -> Value {
        json!({
            "mechanical_slack_constant": self.mechanical,
            "thermal_slack_constant": self.thermal,
            "slack_limit": self.limit,
            "relative_boundary_residual": self.boundary,
            "boundary_tolerance": BOUNDARY_TOLERANCE,
            "bounded": self.bounded,
            "pass": self.pass(),
        })
    }
}

fn diagnostics(traj: &Trajectory) -> Value {
    let rates = dt_theta_diagnostic(traj).ok();
    json!({
        "outputs": traj.ledger.len(),
        "final_time": traj.ledger.last().map_or(0.0, |r| r.t),
        "initial_compatibility": traj.initial_compatibility,
        "max_boundary_residual": traj.max_boundary_residual,
        "residual_scale": traj.residual_scale,
        "max_contraction_ratio": traj.max_contraction_ratio,
        "max_mechanical_slack": traj.max_mechanical_slack(),
        "max_thermal_slack": traj.max_thermal_slack(),
        "min_theta": traj.monitor.min,
        "max_theta": traj.monitor.max,
        "rates": rates,
    })
}

fn format_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}
