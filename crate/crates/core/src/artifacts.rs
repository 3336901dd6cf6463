//! On-disk formats.
//!
//! Field snapshots and basis caches share one layout: a single JSON header
//! line, then either CSV rows or a raw little-endian `f64` block. Time series
//! are plain CSV with a header row.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupled::{CoefficientRow, LedgerRow, Trajectory};
use crate::error::{Error, Result};
use crate::heat::HeatLedgerRow;
use crate::mesh::{BoundaryData, Mesh, ScalarField, VectorField};
use crate::stokes::StokesBasis;

const FORMAT_TAG: &str = "nlb-field";
const BASIS_TAG: &str = "nlb-stokes-basis";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Csv,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
}

/// Header line of a field snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub format: String,
    pub kind: FieldKind,
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    /// Order of the data sections.
    pub layout: String,
    pub encoding: Encoding,
    pub count: usize,
}

const SCALAR_LAYOUT: &str = "cells[j][i], trace south, north, west, east";
const VECTOR_LAYOUT: &str = "u[j][i<=nx], v[j<=ny][i], wall u south, u north, v west, v east";

fn format_error(what: impl Into<String>) -> Error {
    Error::Format(what.into())
}

/// Rows of a scalar field: `n` cell rows then the four trace sides.
fn scalar_rows(f: &ScalarField) -> Vec<Vec<f64>> {
    let n = f.mesh().n();
    let mut rows: Vec<Vec<f64>> = f.values().chunks(n).map(<[f64]>::to_vec).collect();
    rows.extend(f.trace().sides().iter().map(|s| s.to_vec()));
    rows
}

fn vector_rows(w: &VectorField) -> Vec<Vec<f64>> {
    let n = w.mesh().n();
    let mut rows: Vec<Vec<f64>> = w.u().chunks(n + 1).map(<[f64]>::to_vec).collect();
    rows.extend(w.v().chunks(n).map(<[f64]>::to_vec));
    rows.extend(w.tangential_trace().iter().map(|s| s.to_vec()));
    rows
}

fn write_snapshot(path: &Path, header: &SnapshotHeader, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header).map_err(|e| format_error(e.to_string()))?;
    out.write_all(b"\n")?;
    match header.encoding {
        Encoding::Csv => {
            for row in rows {
                let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
        Encoding::Raw => {
            for x in rows.iter().flatten() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Vec<f64>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: SnapshotHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| format_error(format!("{}: header: {e}", path.display())))?;
    if header.format != FORMAT_TAG {
        return Err(format_error(format!("{}: not a field snapshot", path.display())));
    }
    if header.nx != header.ny {
        return Err(format_error("only square meshes are supported"));
    }
    let data = match header.encoding {
        Encoding::Csv => {
            let mut data = Vec::with_capacity(header.count);
            for line in reader.lines() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                for tok in line.split(',') {
                    data.push(
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|e| format_error(format!("{}: bad number {tok:?}: {e}", path.display())))?,
                    );
                }
            }
            data
        }
        Encoding::Raw => read_raw(&mut reader, header.count)?,
    };
    if data.len() != header.count {
        return Err(format_error(format!(
            "{}: expected {} values, found {}",
            path.display(),
            header.count,
            data.len()
        )));
    }
    Ok((header, data))
}

fn read_raw(reader: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(format_error(format!("raw block has {} bytes, expected {}", bytes.len(), count * 8)));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect())
}

pub fn write_scalar(path: &Path, f: &ScalarField, t: f64, encoding: Encoding) -> Result<()> {
    let n = f.mesh().n();
    let header = SnapshotHeader {
        format: FORMAT_TAG.into(),
        kind: FieldKind::Scalar,
        nx: n,
        ny: n,
        t,
        layout: SCALAR_LAYOUT.into(),
        encoding,
        count: n * n + 4 * n,
    };
    write_snapshot(path, &header, &scalar_rows(f))
}

pub fn read_scalar(path: &Path) -> Result<(ScalarField, f64)> {
    let (header, data) = read_snapshot(path)?;
    if header.kind != FieldKind::Scalar {
        return Err(format_error(format!("{}: expected a scalar field", path.display())));
    }
    let mesh = Mesh::new(header.nx)?;
    let n = header.nx;
    if data.len() != n * n + 4 * n {
        return Err(format_error("scalar snapshot has the wrong size"));
    }
    let side = |k: usize| data[n * n + k * n..n * n + (k + 1) * n].to_vec();
    let trace = BoundaryData {
        south: side(0),
        north: side(1),
        west: side(2),
        east: side(3),
    };
    Ok((ScalarField::new(mesh, data[..n * n].to_vec(), trace)?, header.t))
}

pub fn write_vector(path: &Path, w: &VectorField, t: f64, encoding: Encoding) -> Result<()> {
    let mesh = w.mesh();
    let n = mesh.n();
    let header = SnapshotHeader {
        format: FORMAT_TAG.into(),
        kind: FieldKind::Vector,
        nx: n,
        ny: n,
        t,
        layout: VECTOR_LAYOUT.into(),
        encoding,
        count: mesh.ufaces() + mesh.vfaces() + 4 * (n + 1),
    };
    write_snapshot(path, &header, &vector_rows(w))
}

pub fn read_vector(path: &Path) -> Result<(VectorField, f64)> {
    let (header, data) = read_snapshot(path)?;
    if header.kind != FieldKind::Vector {
        return Err(format_error(format!("{}: expected a vector field", path.display())));
    }
    let mesh = Mesh::new(header.nx)?;
    let (nu, nv) = (mesh.ufaces(), mesh.vfaces());
    let n1 = mesh.n() + 1;
    if data.len() != nu + nv + 4 * n1 {
        return Err(format_error("vector snapshot has the wrong size"));
    }
    let mut w = VectorField::from_components(mesh, data[..nu].to_vec(), data[nu..nu + nv].to_vec())?;
    let off = nu + nv;
    let side = |k: usize| data[off + k * n1..off + (k + 1) * n1].to_vec();
    w.set_tangential_trace([side(0), side(1), side(2), side(3)])?;
    Ok((w, header.t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisHeader {
    format: String,
    nx: usize,
    modes: usize,
    eigenvalues: Vec<f64>,
    layout: String,
}

/// Cache file name for a basis of `modes` modes on an `nx` mesh.
pub fn basis_cache_path(dir: &Path, nx: usize, modes: usize) -> PathBuf {
    dir.join(format!("stokes_nx{nx}_n{modes}.bin"))
}

pub fn write_basis(path: &Path, basis: &StokesBasis) -> Result<()> {
    let header = BasisHeader {
        format: BASIS_TAG.into(),
        nx: basis.mesh().n(),
        modes: basis.len(),
        eigenvalues: basis.eigenvalues().to_vec(),
        layout: "per mode: u faces then v faces".into(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header).map_err(|e| format_error(e.to_string()))?;
    out.write_all(b"\n")?;
    for w in basis.modes() {
        for x in w.u().iter().chain(w.v()) {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_basis(path: &Path) -> Result<StokesBasis> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: BasisHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| format_error(format!("{}: header: {e}", path.display())))?;
    if header.format != BASIS_TAG || header.eigenvalues.len() != header.modes {
        return Err(format_error(format!("{}: not a basis cache", path.display())));
    }
    let mesh = Mesh::new(header.nx)?;
    let per = mesh.ufaces() + mesh.vfaces();
    let data = read_raw(&mut reader, per * header.modes)?;
    let modes = data
        .chunks_exact(per)
        .map(|c| VectorField::from_components(mesh, c[..mesh.ufaces()].to_vec(), c[mesh.ufaces()..].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    StokesBasis::from_parts(mesh, header.eigenvalues, modes)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => format_error(format!("{other:?}")),
    }
}

fn write_csv<'a>(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>> + 'a) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x:?}"))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ledger(path: &Path, rows: &[LedgerRow]) -> Result<()> {
    let header: Vec<String> = LedgerRow::HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(path, &header, rows.iter().map(|r| r.record().to_vec()))
}

pub fn write_heat_ledger(path: &Path, rows: &[HeatLedgerRow]) -> Result<()> {
    let header: Vec<String> = HeatLedgerRow::HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(path, &header, rows.iter().map(|r| r.record().to_vec()))
}

pub fn write_coefficients(path: &Path, rows: &[CoefficientRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.coeffs.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|k| format!("c_{k}")));
    header.push("kinetic_energy".into());
    header.push("dissipation".into());
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            let mut v = vec![r.t];
            v.extend(&r.coeffs);
            v.push(r.kinetic_energy);
            v.push(r.dissipation);
            v
        }),
    )
}

/// A CSV table of floats read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format_error(format!("missing column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| format_error(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(format_error("ragged CSV row"));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// File names inside a run directory.
pub mod layout {
    pub const CONFIG: &str = "config.json";
    pub const LEDGER: &str = "ledger.csv";
    pub const HEAT_LEDGER: &str = "heat_ledger.csv";
    pub const COEFFICIENTS: &str = "coefficients.csv";
    pub const FIELDS: &str = "fields";
    pub const REPORT: &str = "report.json";
    pub const PLOT_ENERGY: &str = "plot_energy.csv";
    pub const PLOT_MEAN: &str = "plot_mean_theta.csv";
    pub const PLOT_SLACK: &str = "plot_slack.csv";
    pub const PLOT_SUMMARY: &str = "plot_summary.json";
}

/// Writes ledgers, coefficients and snapshots of a trajectory into `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_ledger(&dir.join(layout::LEDGER), &traj.ledger)?;
    write_heat_ledger(&dir.join(layout::HEAT_LEDGER), &traj.heat_rows)?;
    write_coefficients(&dir.join(layout::COEFFICIENTS), &traj.coefficients)?;
    if !traj.snapshots.is_empty() {
        let fields = dir.join(layout::FIELDS);
        fs::create_dir_all(&fields)?;
        for (k, s) in traj.snapshots.iter().enumerate() {
            write_scalar(&fields.join(format!("theta_{k:05}.field")), &s.theta, s.t, Encoding::Raw)?;
            write_vector(&fields.join(format!("velocity_{k:05}.field")), &s.velocity, s.t, Encoding::Raw)?;
        }
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| format_error(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Column sums of every plot series, used to cross-check against the ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSummary {
    pub rows: usize,
    pub sums: std::collections::BTreeMap<String, f64>,
}

const ENERGY_COLUMNS: [&str; 7] = [
    "t",
    "kinetic_energy",
    "viscous_dissipation",
    "buoyancy_work",
    "heat_quadratic",
    "thermal_dissipation",
    "boundary_work",
];
const MEAN_COLUMNS: [&str; 3] = ["t", "mean_theta", "mean_theta_rate"];
const SLACK_COLUMNS: [&str; 4] = ["t", "mechanical_slack", "thermal_slack", "weighted_slack"];

/// Splits `ledger.csv` of a run directory into plot-ready series.
pub fn emit_plotdata(dir: &Path) -> Result<PlotSummary> {
    let ledger_path = dir.join(layout::LEDGER);
    if !ledger_path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} not found", ledger_path.display()),
        )));
    }
    let table = read_table(&ledger_path)?;
    let mut sums = std::collections::BTreeMap::new();
    for (name, cols) in [
        (layout::PLOT_ENERGY, &ENERGY_COLUMNS[..]),
        (layout::PLOT_MEAN, &MEAN_COLUMNS[..]),
        (layout::PLOT_SLACK, &SLACK_COLUMNS[..]),
    ] {
        let data = cols.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;
        let header: Vec<String> = cols.iter().map(|s| s.to_string()).collect();
        write_csv(
            &dir.join(name),
            &header,
            (0..table.rows.len()).map(|r| data.iter().map(|col| col[r]).collect()),
        )?;
        for (c, col) in cols.iter().zip(&data) {
            sums.insert(c.to_string(), col.iter().sum());
        }
    }
    let summary = PlotSummary {
        rows: table.rows.len(),
        sums,
    };
    write_json(
        &dir.join(layout::PLOT_SUMMARY),
        &serde_json::to_value(&summary).map_err(|e| format_error(e.to_string()))?,
    )?;
    Ok(summary)
}
