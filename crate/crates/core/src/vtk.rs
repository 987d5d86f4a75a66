//! Legacy ASCII VTK (`STRUCTURED_POINTS`) export of grid labels and fields.

use std::fmt::Write as _;

use crate::calculus::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::scalar::Real;

/// Renders the node labels (`0` fluid, `1` hole, `2` exterior) and any
/// scalar fields, zero-extended to all nodes.
pub fn structured_points<T: Real>(grid: &Grid<T>, fields: &[(&str, &ScalarField<T>)]) -> Result<String> {
    for (name, f) in fields {
        if !f.grid().same_layout(grid) {
            return Err(Error::GridMismatch);
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid VTK field name {name:?}")));
        }
    }
    let s = grid.shape();
    let o = grid.origin();
    let h = grid.spacing();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nperforated grid\nASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", s[0], s[1], s[2]);
    let _ = writeln!(out, "ORIGIN {} {} {}", o[0], o[1], if grid.dim() == 3 { o[2] } else { T::zero() });
    let _ = writeln!(out, "SPACING {h} {h} {h}");
    let _ = writeln!(out, "POINT_DATA {}", grid.node_count());
    out.push_str("SCALARS label int 1\nLOOKUP_TABLE default\n");
    for l in grid.labels() {
        let _ = writeln!(out, "{}", l.code());
    }
    for (name, f) in fields {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in f.to_full() {
            let _ = writeln!(out, "{v:e}");
        }
    }
    Ok(out)
}
