//! CSV serialisation of controls, fields, interfaces and descent history.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! re-reading a file recovers the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::control::{BoundaryControl, BoundarySeries};
use crate::error::{Error, Result};
use crate::forward::State;
use crate::grid::Grid;
use crate::optimize::HistoryRecord;
use crate::scenarios::InterfaceSet;

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub const CONTROL_HEADER: &str = "k,t,edge,i,x1,x2,u";

/// `k,t,edge,i,x1,x2,u`, one row per time level and boundary point; `x2`
/// is empty in 1D.
pub fn control_csv(control: &BoundaryControl, grid: &Grid) -> Result<String> {
    control.check_shape(grid)?;
    let mut s = String::new();
    writeln!(s, "{CONTROL_HEADER}").unwrap();
    let coords: Vec<_> = grid.boundary().iter().map(|b| grid.coords(b.index)).collect();
    for k in 0..grid.time_levels() {
        let t = grid.time(k);
        for ((b, u), (x1, x2)) in grid.boundary().iter().zip(control.level(k)).zip(&coords) {
            let x2 = if grid.is_2d() { x2.to_string() } else { String::new() };
            writeln!(s, "{k},{t},{},{},{x1},{x2},{u}", b.edge.name(), b.along).unwrap();
        }
    }
    Ok(s)
}

/// Reads a control written by [`control_csv`] for the same grid.
pub fn read_control_csv(path: &Path, grid: &Grid) -> Result<BoundaryControl> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, reason: String| Error::ControlFormat {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CONTROL_HEADER => {}
        _ => return Err(err(1, format!("expected header {CONTROL_HEADER:?}"))),
    }
    let nb = grid.boundary_len();
    let mut out = BoundarySeries::zeros(grid);
    let mut seen = vec![false; grid.time_levels() * nb];
    let lookup: std::collections::HashMap<_, _> = grid
        .boundary()
        .iter()
        .enumerate()
        .map(|(n, b)| ((b.edge, b.along), n))
        .collect();
    for (n, line) in lines {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(err(line_no, format!("expected 7 columns, found {}", cols.len())));
        }
        let k: usize = cols[0]
            .parse()
            .map_err(|_| err(line_no, "bad time level".into()))?;
        let edge = crate::grid::Edge::parse(cols[2]).ok_or_else(|| err(line_no, format!("unknown edge {:?}", cols[2])))?;
        let along: usize = cols[3]
            .parse()
            .map_err(|_| err(line_no, "bad point index".into()))?;
        let u: f64 = cols[6]
            .parse()
            .map_err(|_| err(line_no, "bad control value".into()))?;
        let b = *lookup
            .get(&(edge, along))
            .ok_or_else(|| err(line_no, format!("no boundary point {} {along}", edge.name())))?;
        if k >= grid.time_levels() {
            return Err(err(line_no, format!("time level {k} out of range")));
        }
        if !u.is_finite() {
            return Err(err(line_no, "non-finite control value".into()));
        }
        out.set(k, b, u);
        seen[k * nb + b] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(err(
            0,
            format!("missing value for level {} point {}", missing / nb, missing % nb),
        ));
    }
    Ok(out)
}

pub const FIELD_HEADER: &str = "i,j,x1,x2,y,ytilde";

/// `i,j,x1,x2,y,ytilde` for every mesh point; `j` and `x2` are empty in 1D.
pub fn field_csv(state: &State, grid: &Grid) -> Result<String> {
    grid.check_field(&state.temperature, "temperature")?;
    grid.check_field(&state.phase, "phase")?;
    let (_, n2) = grid.shape();
    let (y, ph) = (state.temperature.values(), state.phase.values());
    let mut s = String::new();
    writeln!(s, "{FIELD_HEADER}").unwrap();
    for k in 0..grid.len() {
        let (x1, x2) = grid.coords(k);
        let (i, j) = (k / n2, k % n2);
        if grid.is_2d() {
            writeln!(s, "{i},{j},{x1},{x2},{},{}", y[k], ph[k]).unwrap();
        } else {
            writeln!(s, "{i},,{x1},,{},{}", y[k], ph[k]).unwrap();
        }
    }
    Ok(s)
}

/// Interfaces at several times. 2D: `t,segment_id,x1a,x2a,x1b,x2b`;
/// 1D: `t,crossing_id,x1`.
pub fn interface_csv(entries: &[(f64, InterfaceSet)], two_d: bool) -> String {
    let mut s = String::new();
    if two_d {
        writeln!(s, "t,segment_id,x1a,x2a,x1b,x2b").unwrap();
    } else {
        writeln!(s, "t,crossing_id,x1").unwrap();
    }
    for (t, set) in entries {
        match set {
            InterfaceSet::Points(p) => {
                for (n, x) in p.iter().enumerate() {
                    writeln!(s, "{t},{n},{x}").unwrap();
                }
            }
            InterfaceSet::Segments(segs) => {
                for (n, g) in segs.iter().enumerate() {
                    writeln!(s, "{t},{n},{},{},{},{}", g.a.0, g.a.1, g.b.0, g.b.1).unwrap();
                }
            }
        }
    }
    s
}

pub const HISTORY_HEADER: &str = "iter,J,mismatch,reg,error_norm,grad_norm,phys_excess,wall_ms";

/// Descent history; `grad_norm` is empty where it was not computed.
pub fn history_csv(history: &[HistoryRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{HISTORY_HEADER}").unwrap();
    for r in history {
        s.push_str(&history_row(r));
    }
    s
}

pub fn history_row(r: &HistoryRecord) -> String {
    let g = if r.grad_norm.is_nan() {
        String::new()
    } else {
        r.grad_norm.to_string()
    };
    format!(
        "{},{},{},{},{},{g},{},{:.3}\n",
        r.iteration, r.cost, r.mismatch, r.regularization, r.error_norm, r.physicality_excess, r.wall_ms
    )
}
