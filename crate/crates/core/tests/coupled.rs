use nlboussinesq::coupled::{
    dt_theta_diagnostic, run, shift_consistency, GalerkinModel, Problem, RunSettings, SplitOrder, VelocityMode,
};
use nlboussinesq::mesh::{BoundaryData, GPreset, Mesh, ScalarField};
use nlboussinesq::momentum::momentum_step;
use nlboussinesq::nonlocal::NonlocalParams;
use nlboussinesq::scenario::{build_scenario, cell_flow, ScenarioId, ScenarioKnobs};

fn settings(dt: f64, t_end: f64, n_modes: usize) -> RunSettings {
    RunSettings {
        dt,
        t_end,
        output_every: t_end / 10.0,
        n_modes,
        order: SplitOrder::HeatFirst,
        velocity: VelocityMode::Galerkin,
        snapshots: false,
    }
}

#[test]
fn shifted_run_equals_direct_run() {
    let mesh = Mesh::new(16).unwrap();
    let model = GalerkinModel::build(mesh, 8).unwrap();
    for preset in [GPreset::XLinear, GPreset::YLinear] {
        let params = NonlocalParams::new(1.5, 0.7, 0.05, 0.05).unwrap();
        let knobs = ScenarioKnobs {
            potential: Some(preset),
            ..Default::default()
        };
        let s = build_scenario(ScenarioId::BuoyantCell, &knobs, mesh, params).unwrap();
        let d = shift_consistency(&s.problem, &settings(5e-3, 0.5, 8), &model).unwrap();
        assert!(d <= 1e-11, "{preset:?}: {d:e}");
    }
}

#[test]
fn decoupled_velocity_decays_as_pure_navier_stokes() {
    // A constant temperature in a linear potential exerts no load and is not
    // changed by a solenoidal flow, so the coupled run must reproduce the
    // standalone momentum stepper.
    let mesh = Mesh::new(16).unwrap();
    let model = GalerkinModel::build(mesh, 8).unwrap();
    let params = NonlocalParams::new(1.0, 0.0, 0.2, 0.02).unwrap();
    let tb = 2.0;
    let c = tb / 2.0;
    let problem = Problem {
        mesh,
        params,
        potential: GPreset::YLinear.field(mesh),
        theta_b: BoundaryData::constant(&mesh, tb),
        theta_0: ScalarField::constant(mesh, c).with_trace(BoundaryData::constant(&mesh, c)).unwrap(),
        v_0: cell_flow(mesh, 0.3),
    };
    let s = settings(5e-3, 2.0, 8);
    let traj = run(&problem, &s, &model).unwrap();

    let mut state = model.basis.project(&problem.v_0, 8).unwrap();
    let zero = vec![0.0; 8];
    for _ in 0..s.steps().unwrap() {
        state = momentum_step(&state, &model.tensor, model.basis.eigenvalues(), &zero, params.mu, s.dt)
            .unwrap()
            .0;
    }
    let diff = traj
        .final_coeffs
        .iter()
        .zip(state.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff <= 1e-12, "{diff:e}");
    assert!(traj.final_theta.values().iter().all(|x| (x - c).abs() <= 1e-12));
    assert!(traj.ledger.last().unwrap().kinetic_energy < traj.ledger[0].kinetic_energy);
}

#[test]
fn resting_fluid_relaxes_to_the_nonlocal_equilibrium() {
    let mesh = Mesh::new(16).unwrap();
    let model = GalerkinModel::build(mesh, 2).unwrap();
    let params = NonlocalParams::new(1.0, 0.0, 0.5, 0.5).unwrap();
    let knobs = ScenarioKnobs {
        boundary_variation: Some(0.0),
        ..Default::default()
    };
    let s = build_scenario(ScenarioId::ThermalDecay, &knobs, mesh, params).unwrap();
    let settings = RunSettings {
        velocity: VelocityMode::Frozen,
        ..settings(5e-3, 3.0, 2)
    };
    let traj = run(&s.problem, &settings, &model).unwrap();
    let target = 2.0 / (1.0 + 1.0);
    let err = traj.final_theta.values().iter().map(|x| (x - target).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn both_split_orders_keep_the_ledger_inequalities() {
    let mesh = Mesh::new(16).unwrap();
    let model = GalerkinModel::build(mesh, 8).unwrap();
    let params = NonlocalParams::new(1.0, 0.0, 0.02, 0.02).unwrap();
    let s = build_scenario(ScenarioId::BuoyantCell, &ScenarioKnobs::default(), mesh, params).unwrap();
    for order in [SplitOrder::HeatFirst, SplitOrder::MomentumFirst] {
        let settings = RunSettings {
            order,
            ..settings(4e-3, 1.0, 8)
        };
        let traj = run(&s.problem, &settings, &model).unwrap();
        let c_mech = traj.slack_constant(|r| r.mechanical_slack);
        let c_heat = traj.slack_constant(|r| r.thermal_slack);
        assert!(c_mech <= 2e-3 && c_heat <= 2e-3, "{order:?}: {c_mech:e} {c_heat:e}");
        for r in &traj.ledger {
            assert!(r.weighted_slack.abs() <= 2e-3 * settings.dt * r.t, "{order:?} t = {}: {:e}", r.t, r.weighted_slack);
        }
    }
}

#[test]
fn pure_decay_mean_rate_decreases() {
    let mesh = Mesh::new(16).unwrap();
    let model = GalerkinModel::build(mesh, 2).unwrap();
    let params = NonlocalParams::new(1.0, 0.0, 0.5, 0.5).unwrap();
    let s = build_scenario(ScenarioId::ThermalDecay, &ScenarioKnobs::default(), mesh, params).unwrap();
    let settings = RunSettings {
        velocity: VelocityMode::Frozen,
        ..settings(2e-3, 1.0, 2)
    };
    let traj = run(&s.problem, &settings, &model).unwrap();
    let rates: Vec<f64> = traj.ledger[1..].iter().map(|r| r.mean_theta_rate.abs()).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
    let report = dt_theta_diagnostic(&traj).unwrap();
    assert_eq!(report.sup_mean_rate, rates[0]);
    assert!(traj.final_velocity.max_abs() == 0.0);
}
