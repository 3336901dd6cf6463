mod common;

use nlboussinesq::artifacts::{
    basis_cache_path, emit_plotdata, read_basis, read_scalar, read_table, read_vector, write_basis, write_ledger,
    write_scalar, write_vector, Encoding,
};
use nlboussinesq::coupled::{run, GalerkinModel, LedgerRow, RunSettings, SplitOrder, VelocityMode};
use nlboussinesq::mesh::Mesh;
use nlboussinesq::nonlocal::NonlocalParams;
use nlboussinesq::scenario::{build_scenario, ScenarioId, ScenarioKnobs};
use nlboussinesq::stokes::build_basis;
use nlboussinesq::Error;

#[test]
fn scalar_snapshots_round_trip_in_both_encodings() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = common::rng(11);
    let f = common::random_field(&mut r, Mesh::new(10).unwrap());
    for enc in [Encoding::Csv, Encoding::Raw] {
        let path = dir.path().join(format!("theta_{enc:?}.field"));
        write_scalar(&path, &f, 0.25, enc).unwrap();
        let (back, t) = read_scalar(&path).unwrap();
        assert_eq!(t, 0.25);
        assert_eq!(back, f);
    }
}

#[test]
fn vector_snapshots_keep_wall_values() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = Mesh::new(9).unwrap();
    let w = nlboussinesq::mesh::VectorField::from_fn(mesh, |x, y| x * y + 0.1, |x, y| (x - y).sin());
    for enc in [Encoding::Csv, Encoding::Raw] {
        let path = dir.path().join("v.field");
        write_vector(&path, &w, 1.5, enc).unwrap();
        let (back, t) = read_vector(&path).unwrap();
        assert_eq!(t, 1.5);
        assert_eq!(back, w);
    }
}

#[test]
fn wrong_kind_and_truncated_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = Mesh::new(8).unwrap();
    let path = dir.path().join("t.field");
    write_scalar(&path, &nlboussinesq::mesh::ScalarField::zeros(mesh), 0.0, Encoding::Raw).unwrap();
    assert!(matches!(read_vector(&path), Err(Error::Format(_))));
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(read_scalar(&path), Err(Error::Format(_))));
    assert!(matches!(read_scalar(&dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn basis_cache_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let basis = build_basis(Mesh::new(12).unwrap(), 6).unwrap();
    let path = basis_cache_path(dir.path(), 12, 6);
    write_basis(&path, &basis).unwrap();
    let back = read_basis(&path).unwrap();
    assert_eq!(back.eigenvalues(), basis.eigenvalues());
    for (a, b) in back.modes().iter().zip(basis.modes()) {
        assert_eq!(a.u(), b.u());
        assert_eq!(a.v(), b.v());
    }
}

#[test]
fn ledger_csv_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<LedgerRow> = (0..5)
        .map(|k| LedgerRow {
            t: k as f64 * 0.1,
            kinetic_energy: 1.0 / 3.0 + k as f64,
            mechanical_slack: -1e-17 * k as f64,
            ..Default::default()
        })
        .collect();
    let path = dir.path().join("ledger.csv");
    write_ledger(&path, &rows).unwrap();
    let table = read_table(&path).unwrap();
    assert_eq!(table.header, LedgerRow::HEADER);
    for (row, rec) in rows.iter().zip(&table.rows) {
        assert_eq!(&row.record()[..], &rec[..]);
    }
}

#[test]
fn plot_series_sum_to_ledger_totals() {
    let mesh = Mesh::new(16).unwrap();
    let params = NonlocalParams::new(1.0, 0.0, 0.05, 0.05).unwrap();
    let s = build_scenario(ScenarioId::BuoyantCell, &ScenarioKnobs::default(), mesh, params).unwrap();
    let model = GalerkinModel::build(mesh, 6).unwrap();
    let settings = RunSettings {
        dt: 5e-3,
        t_end: 0.25,
        output_every: 0.05,
        n_modes: 6,
        order: SplitOrder::HeatFirst,
        velocity: VelocityMode::Galerkin,
        snapshots: false,
    };
    let traj = run(&s.problem, &settings, &model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_ledger(&dir.path().join("ledger.csv"), &traj.ledger).unwrap();
    let summary = emit_plotdata(dir.path()).unwrap();
    assert_eq!(summary.rows, traj.ledger.len());
    let idx = |name: &str| LedgerRow::HEADER.iter().position(|h| *h == name).unwrap();
    for (name, sum) in &summary.sums {
        let total: f64 = traj.ledger.iter().map(|r| r.record()[idx(name)]).sum();
        assert!((sum - total).abs() <= 1e-12 * total.abs().max(1.0), "{name}: {sum} vs {total}");
    }
    let energy = read_table(&dir.path().join("plot_energy.csv")).unwrap();
    assert_eq!(energy.rows.len(), traj.ledger.len());
}

#[test]
fn plotdata_of_equilibrium_is_flat() {
    let mesh = Mesh::new(8).unwrap();
    let params = NonlocalParams::new(1.0, 0.0, 0.1, 0.1).unwrap();
    let s = build_scenario(ScenarioId::Equilibrium, &ScenarioKnobs::default(), mesh, params).unwrap();
    let model = GalerkinModel::build(mesh, 4).unwrap();
    let settings = RunSettings {
        dt: 1e-2,
        t_end: 0.5,
        output_every: 0.1,
        n_modes: 4,
        order: SplitOrder::HeatFirst,
        velocity: VelocityMode::Galerkin,
        snapshots: false,
    };
    let traj = run(&s.problem, &settings, &model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_ledger(&dir.path().join("ledger.csv"), &traj.ledger).unwrap();
    emit_plotdata(dir.path()).unwrap();
    let mean = read_table(&dir.path().join("plot_mean_theta.csv")).unwrap();
    for m in mean.column("mean_theta").unwrap() {
        assert!((m - 1.0).abs() <= 1e-12);
    }
    for k in read_table(&dir.path().join("plot_energy.csv")).unwrap().column("kinetic_energy").unwrap() {
        assert!(k.abs() <= 1e-28, "{k}");
    }
}

#[test]
fn plotdata_without_ledger_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(emit_plotdata(dir.path()), Err(Error::Io(_))));
}
