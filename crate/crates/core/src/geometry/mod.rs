//! Perforated domains on structured grids: hole shapes, the periodic cell,
//! the truncated lattice and the bounded host.

mod domain;
mod grid;
mod shape;

pub use domain::{
    build_bounded_domain, build_cell_grid, build_domain, build_lattice_domain, build_plain_box, estimate_bytes,
    perforated_cells, BuildOptions, CellBoundary, DomainSpec, Host, Resolution, Spacing,
};
pub use grid::{AxisMode, Grid, GridInfo, Label};
pub use shape::{shape_contains, HoleShape, ShapeKind};
