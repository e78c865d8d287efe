//! Bit-stable artifact export: CSV and legacy-VTK fields, JSON reports
//! and convergence plot data.
//!
//! Floats render with 17 significant decimal digits, enough to
//! reproduce every f64 bit-exactly on re-import.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use convopt_core::verify::ConvergenceStudy;
use convopt_core::{ScalarField, UniformGrid};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with columns `x,y,value` over all grid nodes in row-major order
/// (x fastest), boundary zeros included.
pub fn write_field_csv(path: &Path, grid: &UniformGrid, field: &ScalarField) -> Result<()> {
    let full = field.to_full_nodal(grid);
    let mut out = String::from("x,y,value\n");
    for iy in 0..=grid.ny() {
        for ix in 0..=grid.nx() {
            let (x, y) = grid.node_coords(ix, iy);
            let v = full[iy * (grid.nx() + 1) + ix];
            out.push_str(&format!("{},{},{}\n", fmt(x), fmt(y), fmt(v)));
        }
    }
    fs::write(path, out).with_context(|| format!("writing field CSV {}", path.display()))
}

/// Re-imports a field CSV written by [`write_field_csv`]; used for
/// round-trip validation.
pub fn read_field_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading field CSV {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "x,y,value" {
                anyhow::bail!("unexpected CSV header: {line}");
            }
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || -> Result<f64> {
            parts
                .next()
                .with_context(|| format!("short row {i}"))?
                .parse::<f64>()
                .with_context(|| format!("bad float in row {i}"))
        };
        rows.push((next()?, next()?, next()?));
    }
    Ok(rows)
}

/// Legacy ASCII VTK `STRUCTURED_POINTS` file with one scalar point
/// field; declares `DIMENSIONS (nx+1) (ny+1) 1`.
pub fn write_field_vtk(
    path: &Path,
    grid: &UniformGrid,
    field: &ScalarField,
    name: &str,
) -> Result<()> {
    let full = field.to_full_nodal(grid);
    let d = grid.domain();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(&format!("convopt field {name}\n"));
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    out.push_str(&format!("DIMENSIONS {} {} 1\n", grid.nx() + 1, grid.ny() + 1));
    out.push_str(&format!("ORIGIN {} {} 0\n", fmt(d.x_min), fmt(d.y_min)));
    out.push_str(&format!("SPACING {} {} 1\n", fmt(grid.hx()), fmt(grid.hy())));
    out.push_str(&format!("POINT_DATA {}\n", grid.n_nodes()));
    out.push_str(&format!("SCALARS {name} double 1\n"));
    out.push_str("LOOKUP_TABLE default\n");
    for v in &full {
        out.push_str(&fmt(*v));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing VTK {}", path.display()))
}

/// Pretty JSON with a trailing newline. Key order is the declaration
/// order of the serialized structs, hence stable across runs.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing JSON {}", path.display()))
}

/// Two-column `h,error` plot files, one per norm.
pub fn write_convergence_plot(dir: &Path, study: &ConvergenceStudy) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for (suffix, errors) in [
        ("l2", &study.l2_errors),
        ("h1", &study.h1_errors),
        ("max", &study.max_errors),
    ] {
        let name = format!("convergence_{suffix}.csv");
        let mut out = String::from("h,error\n");
        for (h, e) in study.h.iter().zip(errors) {
            out.push_str(&format!("{},{}\n", fmt(*h), fmt(*e)));
        }
        let path = dir.join(&name);
        let mut f = fs::File::create(&path)
            .with_context(|| format!("creating plot file {}", path.display()))?;
        f.write_all(out.as_bytes())?;
        written.push(name);
    }
    Ok(written)
}
