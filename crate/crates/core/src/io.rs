//! On-disk formats: field snapshots, trajectory CSV and JSON sidecars.
//!
//! A field file is plain text:
//!
//! ```text
//! # abraham-field-snapshot v1
//! # convention: fhat(k) = (2pi)^(-3/2) int exp(-i k.x) f(x) d^3x
//! # grid: {"n_radial":32,...}
//! # label: <free text>
//! # columns: k kx ky kz ex_re ex_im ey_re ey_im ez_re ez_im bx_re bx_im by_re by_im bz_re bz_im
//! <one whitespace-separated row per node, in node order>
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::{Trajectory, TrajectorySample};
use crate::field::SpectralFieldPair;
use crate::grid::{GridParams, KGrid};
use crate::vector::Complex3;
use crate::{Error, Result};

pub const FIELD_MAGIC: &str = "# abraham-field-snapshot v1";
const CONVENTION: &str = "# convention: fhat(k) = (2pi)^(-3/2) int exp(-i k.x) f(x) d^3x";
const COLUMNS: &str =
    "# columns: k kx ky kz ex_re ex_im ey_re ey_im ez_re ez_im bx_re bx_im by_re by_im bz_re bz_im";

pub fn format_field(field: &SpectralFieldPair, grid: &KGrid, label: &str) -> Result<String> {
    field.check_shape(grid)?;
    let mut out = String::with_capacity(grid.n_nodes() * 400);
    out.push_str(FIELD_MAGIC);
    out.push('\n');
    out.push_str(CONVENTION);
    out.push('\n');
    writeln!(out, "# grid: {}", serde_json::to_string(grid.params())?).unwrap();
    writeln!(out, "# label: {}", label.replace('\n', " ")).unwrap();
    out.push_str(COLUMNS);
    out.push('\n');
    for n in 0..grid.n_nodes() {
        let k_hat = grid.k_hat(n);
        write!(out, "{:e} {:e} {:e} {:e}", grid.k_mag(n), k_hat.x, k_hat.y, k_hat.z).unwrap();
        for z in field.e_hat[n].iter().chain(field.b_hat[n].iter()) {
            write!(out, " {:e} {:e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_field(path: &Path, field: &SpectralFieldPair, grid: &KGrid, label: &str) -> Result<()> {
    std::fs::write(path, format_field(field, grid, label)?)?;
    Ok(())
}

/// A field file's contents: grid parameters, label and the field.
#[derive(Debug, Clone)]
pub struct FieldFile {
    pub grid: GridParams,
    pub label: String,
    pub field: SpectralFieldPair,
}

pub fn parse_field(text: &str, file: &str) -> Result<FieldFile> {
    let bad = |message: String| Error::Format {
        file: file.to_string(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(FIELD_MAGIC) {
        return Err(bad(format!("first line must be `{FIELD_MAGIC}`")));
    }
    let mut grid_params = None;
    let mut label = String::new();
    let mut saw_columns = false;
    let mut e_hat = Vec::new();
    let mut b_hat = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(g) = rest.strip_prefix("grid:") {
                grid_params = Some(
                    serde_json::from_str::<GridParams>(g.trim()).map_err(|e| bad(format!("grid header: {e}")))?,
                );
            } else if let Some(l) = rest.strip_prefix("label:") {
                label = l.trim().to_string();
            } else if rest.starts_with("columns:") {
                saw_columns = rest == &COLUMNS[2..];
            }
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
        if values.len() != 16 {
            return Err(bad(format!("line {}: expected 16 columns, found {}", i + 2, values.len())));
        }
        let c = |j: usize| Complex64::new(values[j], values[j + 1]);
        e_hat.push(Complex3::new(c(4), c(6), c(8)));
        b_hat.push(Complex3::new(c(10), c(12), c(14)));
        rows.push([values[0], values[1], values[2], values[3]]);
    }
    if !saw_columns {
        return Err(bad("missing or unexpected columns header".into()));
    }
    let grid_params = grid_params.ok_or_else(|| bad("missing grid header".into()))?;
    let grid = KGrid::new(grid_params)?;
    if rows.len() != grid.n_nodes() {
        return Err(bad(format!("{} rows for a grid of {} nodes", rows.len(), grid.n_nodes())));
    }
    for (n, row) in rows.iter().enumerate() {
        let k_hat = grid.k_hat(n);
        let expect = [grid.k_mag(n), k_hat.x, k_hat.y, k_hat.z];
        if row.iter().zip(&expect).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0)) {
            return Err(bad(format!("row {n} does not match the header grid")));
        }
    }
    Ok(FieldFile {
        grid: grid_params,
        label,
        field: SpectralFieldPair { e_hat, b_hat },
    })
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let text = std::fs::read_to_string(path)?;
    parse_field(&text, &path.display().to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    ax: f64,
    ay: f64,
    az: f64,
}

fn csv_error(file: &Path, e: csv::Error) -> Error {
    Error::Format {
        file: file.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows = traj.samples.iter().map(|s| TrajectoryRow {
        t: s.t,
        qx: s.q[0],
        qy: s.q[1],
        qz: s.q[2],
        vx: s.v[0],
        vy: s.v[1],
        vz: s.v[2],
        ax: s.v_dot[0],
        ay: s.v_dot[1],
        az: s.v_dot[2],
    });
    write_csv(path, rows)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut samples = Vec::new();
    for row in reader.deserialize::<TrajectoryRow>() {
        let r = row.map_err(|e| csv_error(path, e))?;
        samples.push(TrajectorySample {
            t: r.t,
            q: [r.qx, r.qy, r.qz],
            v: [r.vx, r.vy, r.vz],
            v_dot: [r.ax, r.ay, r.az],
        });
    }
    if samples.len() < 2 {
        return Err(Error::Format {
            file: path.display().to_string(),
            message: "trajectory needs at least two samples".into(),
        });
    }
    let spacing = samples[1].t - samples[0].t;
    Ok(Trajectory { samples, spacing })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}
