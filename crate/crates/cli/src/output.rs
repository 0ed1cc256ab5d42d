//! CSV tables, triangle meshes and the plot script.

use std::io::Write;
use std::path::Path;

use shf_core::geometry::ConstraintFields;
use shf_core::grid::NodeKind;
use shf_core::levelset::mesh::TriMesh;
use shf_core::levelset::node_level;
use shf_core::solver::Solver;
use shf_core::verify::FluxEstimate;

use crate::error::{CliError, CliResult};

pub const PROFILE_CSV: &str = "profile.csv";
pub const FLUX_CSV: &str = "flux.csv";
pub const ITERATES_CSV: &str = "tuner_iterates.csv";
pub const REFINE_CSV: &str = "refine.csv";
pub const PLOT_SCRIPT: &str = "plot.py";

fn writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Serialize(format!("{}: {e}", path.display())))
}

/// One row per radial index; on the torus backend every column except `r`
/// is averaged over the non-excised nodes of that radius.
pub fn write_profile(path: &Path, solver: &Solver<'_>, u: &[f64], constraints: &ConstraintFields) -> CliResult<()> {
    let grid = &solver.data.grid;
    let residual = solver.residual(u);
    let mut sums = vec![[0.0f64; 6]; grid.n_r];
    let mut counts = vec![0usize; grid.n_r];
    for n in 0..grid.len() {
        if matches!(solver.lattice.kinds[n], NodeKind::Excised(_)) {
            continue;
        }
        let i = grid.unindex(n)[0];
        let theta = node_level(solver, u, constraints, n).map_or(f64::NAN, |l| l.theta_plus);
        let row = [u[n], solver.grad_norm(u, n), residual[n], theta, constraints.mu[n], constraints.dec_margin[n]];
        for (s, v) in sums[i].iter_mut().zip(row) {
            *s += v;
        }
        counts[i] += 1;
    }
    let mut w = writer(path)?;
    w.write_record(["r", "u", "grad_norm", "residual", "theta_plus", "mu", "dec_margin"])?;
    for i in 0..grid.n_r {
        if counts[i] == 0 {
            continue;
        }
        let mut rec = vec![fmt(grid.r(i))];
        rec.extend(sums[i].iter().map(|s| fmt(s / counts[i] as f64)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_flux(path: &Path, flux: &FluxEstimate) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["r", "flux", "extrapolant"])?;
    for s in &flux.samples {
        w.write_record([fmt(s.r), fmt(s.flux), fmt(flux.extrapolant(s.r))])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Iterates of the boundary tuner, one row per outer step.
pub fn write_iterates(path: &Path, components: &[usize], iterates: &[Vec<f64>]) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["step".to_string()];
    header.extend(components.iter().map(|c| format!("a{c}")));
    w.write_record(&header)?;
    for (j, a) in iterates.iter().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(a.iter().map(|x| fmt(*x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RefineRow {
    pub quantity: String,
    pub h: f64,
    pub error: f64,
    /// Observed order against the next coarser grid.
    pub order: Option<f64>,
}

pub fn write_refine(path: &Path, rows: &[RefineRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["quantity", "h", "error", "order"])?;
    for r in rows {
        w.write_record([r.quantity.clone(), fmt(r.h), fmt(r.error), r.order.map(fmt).unwrap_or_default()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Named columns of equal length, written side by side.
pub fn write_columns(path: &Path, columns: &[(&str, &[f64])]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(columns.iter().map(|c| c.0))?;
    let rows = columns.first().map_or(0, |c| c.1.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| fmt(c.1[i])))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Triangulated coordinate torus `{r} × T²`, for level sets of radial solutions.
pub fn coordinate_torus_mesh(r: f64, periods: [f64; 2], m: usize) -> TriMesh {
    let idx = |j: usize, l: usize| (j % m) * m + (l % m);
    let vertices = (0..m * m)
        .map(|v| [r, (v / m) as f64 * periods[0] / m as f64, (v % m) as f64 * periods[1] / m as f64])
        .collect();
    let mut triangles = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for l in 0..m {
            triangles.push([idx(j, l), idx(j + 1, l), idx(j + 1, l + 1)]);
            triangles.push([idx(j, l), idx(j + 1, l + 1), idx(j, l + 1)]);
        }
    }
    TriMesh { vertices, triangles, periods: [None, Some(periods[0]), Some(periods[1])] }
}

/// Text triangle list: `v x y z` lines, then `f i j k` with 1-based indices.
pub fn write_mesh(out: &mut impl Write, meshes: &[&TriMesh]) -> std::io::Result<()> {
    let mut offset = 0;
    for m in meshes {
        for v in &m.vertices {
            writeln!(out, "v {} {} {}", fmt(v[0]), fmt(v[1]), fmt(v[2]))?;
        }
    }
    for m in meshes {
        for t in &m.triangles {
            writeln!(out, "f {} {} {}", t[0] + offset + 1, t[1] + offset + 1, t[2] + offset + 1)?;
        }
        offset += m.vertices.len();
    }
    Ok(())
}

/// Shortest round-trip form, so the files are identical across runs.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// A matplotlib script that reads only the CSV files present in `dir`.
pub fn write_plot_script(dir: &Path) -> CliResult<Option<String>> {
    let mut body = String::new();
    if dir.join(PROFILE_CSV).exists() {
        body.push_str(
            r#"
p = read(PROFILE_CSV)
fig, axes = plt.subplots(2, 3, figsize=(12, 6), sharex=True)
for ax, col in zip(axes.flat, ["u", "grad_norm", "residual", "theta_plus", "mu", "dec_margin"]):
    ax.plot(p["r"], p[col])
    ax.set_title(col)
for ax in axes[1]:
    ax.set_xlabel("r")
fig.tight_layout()
fig.savefig(HERE / "profile.png", dpi=150)
"#,
        );
    }
    if dir.join(FLUX_CSV).exists() {
        body.push_str(
            r#"
f = read(FLUX_CSV)
fig, ax = plt.subplots()
ax.plot(f["r"], f["flux"], "o", label="flux")
ax.plot(f["r"], f["extrapolant"], "-", label="a + b/r")
ax.set_xlabel("r")
ax.legend()
fig.savefig(HERE / "flux.png", dpi=150)
"#,
        );
    }
    if dir.join(ITERATES_CSV).exists() {
        body.push_str(
            r#"
t = read(ITERATES_CSV)
fig, ax = plt.subplots()
for col in t:
    if col != "step":
        ax.plot(t["step"], t[col], "o-", label=col)
ax.set_xlabel("outer step")
ax.legend()
fig.savefig(HERE / "tuner_iterates.png", dpi=150)
"#,
        );
    }
    if dir.join(REFINE_CSV).exists() {
        body.push_str(
            r#"
rows = list(csv.DictReader(open(HERE / REFINE_CSV)))
fig, ax = plt.subplots()
for q in sorted({r["quantity"] for r in rows}):
    pts = [(float(r["h"]), float(r["error"])) for r in rows if r["quantity"] == q]
    ax.loglog(*zip(*pts), "o-", label=q)
ax.set_xlabel("h")
ax.set_ylabel("error")
ax.legend()
fig.savefig(HERE / "refine.png", dpi=150)
"#,
        );
    }
    if body.is_empty() {
        return Ok(None);
    }
    let script = format!(
        r#"#!/usr/bin/env python3
"""Regenerates the figures of this run from its CSV files."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
PROFILE_CSV = "{PROFILE_CSV}"
FLUX_CSV = "{FLUX_CSV}"
ITERATES_CSV = "{ITERATES_CSV}"
REFINE_CSV = "{REFINE_CSV}"


def read(name):
    with open(HERE / name) as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}}

{body}"#
    );
    let path = dir.join(PLOT_SCRIPT);
    std::fs::write(&path, script).map_err(|e| CliError::io(&path, e))?;
    Ok(Some(PLOT_SCRIPT.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_indices_are_one_based_and_offset() {
        let tri = TriMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            periods: [None, None, None],
        };
        let mut buf = Vec::new();
        write_mesh(&mut buf, &[&tri, &tri]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let faces: Vec<&str> = text.lines().filter(|l| l.starts_with("f ")).collect();
        assert_eq!(faces, ["f 1 2 3", "f 4 5 6"]);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 6);
        assert!(text.starts_with("v 0.0 0.0 0.0\n"));
    }

    #[test]
    fn coordinate_torus_is_a_closed_torus() {
        let m = coordinate_torus_mesh(2.0, [1.0, 2.0], 8);
        assert_eq!(m.euler_characteristic().unwrap(), 0);
    }
}
