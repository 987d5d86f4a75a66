use serde::{Deserialize, Serialize};

use super::grid::{AxisMode, Grid, GridInfo, Label};
use super::shape::HoleShape;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Outer boundary treatment of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellBoundary {
    Periodic,
    Dirichlet,
    /// Natural boundary on the cell faces; only the hole carries Dirichlet data.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Host<T> {
    /// One cell `ε Y` with hole `ε η T`; with periodic faces this is the
    /// whole lattice `ω_{ε,η}` for every translation-invariant quantity.
    UnitCell { boundary: CellBoundary },
    /// The lattice restricted to the box `[-2R, 2R]^d`, zero outer data.
    TruncatedLattice { r: T },
    /// `Ω = [-side/2, side/2]^d` with holes only in cells contained in `Ω`.
    Bounded { side: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec<T> {
    pub d: usize,
    pub epsilon: T,
    pub eta: T,
    pub shape: HoleShape<T>,
    pub host: Host<T>,
}

impl<T: Real> DomainSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return Err(Error::Config(format!("d must be 2 or 3, got {}", self.d)));
        }
        let in_unit = |x: T| x > T::zero() && x <= T::one();
        if !in_unit(self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if !in_unit(self.eta) {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        match self.host {
            Host::TruncatedLattice { r } if !(r >= T::one()) => {
                Err(Error::Config(format!("lattice radius R must be >= 1, got {r}")))
            }
            Host::Bounded { side } if !(side > T::zero()) => {
                Err(Error::Config(format!("host side must be positive, got {side}")))
            }
            _ => Ok(()),
        }
    }
}

/// Minimum number of grid cells across the inner radius `ε η c0` of a hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub cells_per_radius: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { cells_per_radius: 8.0 }
    }
}

impl Resolution {
    pub fn required_h(&self, epsilon: f64, eta: f64, c0: f64) -> f64 {
        epsilon * eta * c0 / self.cells_per_radius
    }

    /// Largest spacing `2^{-k}` that satisfies the rule.
    pub fn dyadic_h(&self, epsilon: f64, eta: f64, c0: f64) -> f64 {
        let req = self.required_h(epsilon, eta, c0).min(1.0);
        let k = (-req.log2() - 1e-9).ceil().max(0.0);
        2f64.powi(-(k as i32))
    }

    pub fn check(&self, h: f64, epsilon: f64, eta: f64, c0: f64) -> Result<()> {
        if self.cells_per_radius <= 0.0 {
            return Ok(());
        }
        let required = self.required_h(epsilon, eta, c0);
        if h > required * (1.0 + 1e-12) {
            return Err(Error::Resolution { h, required });
        }
        Ok(())
    }
}

/// How a grid spacing is chosen for a given `(ε, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spacing {
    Fixed { h: f64 },
    /// Largest dyadic spacing meeting the resolution rule.
    Dyadic,
}

impl Spacing {
    pub fn h_for(&self, resolution: &Resolution, epsilon: f64, eta: f64, c0: f64) -> f64 {
        match *self {
            Spacing::Fixed { h } => h,
            Spacing::Dyadic => resolution.dyadic_h(epsilon, eta, c0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub resolution: Resolution,
    /// Refuse grids with more nodes than this.
    pub max_nodes: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { resolution: Resolution::default(), max_nodes: 1 << 25 }
    }
}

impl BuildOptions {
    pub fn with_cells_per_radius(cells: f64) -> Self {
        Self { resolution: Resolution { cells_per_radius: cells }, ..Self::default() }
    }

    /// No resolution check; for tests and unperforated reference grids.
    pub fn unchecked() -> Self {
        Self::with_cells_per_radius(0.0)
    }
}

/// Rough memory footprint of a grid plus its assembled operator and solver work vectors.
pub fn estimate_bytes(nodes: usize, dim: usize) -> usize {
    nodes * (1 + 4 + 4) + nodes * (2 * dim + 1) * 12 + nodes * 8 * 12
}

fn check_size(shape: [usize; 3], dim: usize, opts: &BuildOptions) -> Result<()> {
    let nodes: usize = shape.iter().product();
    if nodes > opts.max_nodes {
        return Err(Error::TooLarge { nodes, bytes: estimate_bytes(nodes, dim), cap: opts.max_nodes });
    }
    Ok(())
}

/// Number of grid intervals of length `h` in `length`, requiring an exact fit.
fn intervals<T: Real>(length: T, h: T) -> Result<usize> {
    if !(h > T::zero()) {
        return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
    }
    let n = (length / h).round();
    if n < T::one() || ((n * h - length) / length).abs() > T::lit(1e-9) {
        return Err(Error::Config(format!("h = {h} does not divide {length} evenly")));
    }
    n.to_usize().ok_or_else(|| Error::Config("grid too large".into()))
}

fn axis_shape(dim: usize, n: usize) -> [usize; 3] {
    let mut s = [1; 3];
    s[..dim].iter_mut().for_each(|x| *x = n);
    s
}

/// Lattice indices `k` with `ε (k + Y) ⊆ [-half_width, half_width]^d`.
pub fn perforated_cells(dim: usize, epsilon: f64, half_width: f64) -> Vec<[i64; 3]> {
    let kmax = ((half_width / epsilon) - 0.5 + 1e-9).floor() as i64;
    if kmax < 0 {
        return Vec::new();
    }
    let range = -kmax..=kmax;
    let mut out = Vec::new();
    let zr = if dim == 3 { range.clone() } else { 0..=0 };
    for k2 in zr {
        for k1 in range.clone() {
            for k0 in range.clone() {
                out.push([k0, k1, k2]);
            }
        }
    }
    out
}

/// Cell grid for `εY \ εηT` (here with `ε = 1`).
pub fn build_cell_grid<T: Real>(
    shape: &HoleShape<T>,
    eta: T,
    h: T,
    boundary: CellBoundary,
    d: usize,
    opts: &BuildOptions,
) -> Result<Grid<T>> {
    build_domain(
        &DomainSpec { d, epsilon: T::one(), eta, shape: *shape, host: Host::UnitCell { boundary } },
        h,
        opts,
    )
}

pub fn build_lattice_domain<T: Real>(spec: &DomainSpec<T>, h: T, opts: &BuildOptions) -> Result<Grid<T>> {
    match spec.host {
        Host::TruncatedLattice { .. } => build_domain(spec, h, opts),
        _ => Err(Error::Config("build_lattice_domain needs a truncated-lattice host".into())),
    }
}

pub fn build_bounded_domain<T: Real>(spec: &DomainSpec<T>, h: T, opts: &BuildOptions) -> Result<Grid<T>> {
    match spec.host {
        Host::Bounded { .. } => build_domain(spec, h, opts),
        _ => Err(Error::Config("build_bounded_domain needs a bounded host".into())),
    }
}

/// Unperforated Dirichlet box `[-side/2, side/2]^d`.
pub fn build_plain_box<T: Real>(d: usize, side: T, h: T, opts: &BuildOptions) -> Result<Grid<T>> {
    if !(2..=3).contains(&d) {
        return Err(Error::Config(format!("d must be 2 or 3, got {d}")));
    }
    let n = intervals(side, h)?;
    let dims = axis_shape(d, n + 1);
    check_size(dims, d, opts)?;
    let mut modes = [AxisMode::Dirichlet; 3];
    modes[d..].iter_mut().for_each(|m| *m = AxisMode::Neumann);
    let info = GridInfo { epsilon: 1.0, eta: 0.0 };
    Grid::classify(d, h, [-T::lit(0.5) * side; 3], dims, modes, info, |_| Label::Fluid)
}

/// Builds the grid for any host.
pub fn build_domain<T: Real>(spec: &DomainSpec<T>, h: T, opts: &BuildOptions) -> Result<Grid<T>> {
    spec.validate()?;
    let d = spec.d;
    let (eps, eta) = (spec.epsilon, spec.eta);
    opts.resolution.check(h.as_f64(), eps.as_f64(), eta.as_f64(), spec.shape.c0.as_f64())?;
    let info = GridInfo { epsilon: eps.as_f64(), eta: eta.as_f64() };
    let shape = spec.shape;
    let eps_eta = eps * eta;
    let half = T::lit(0.5);

    match spec.host {
        Host::UnitCell { boundary } => {
            let n = intervals(eps, h)?;
            let (count, mode) = match boundary {
                CellBoundary::Periodic => (n, AxisMode::Periodic),
                CellBoundary::Dirichlet => (n + 1, AxisMode::Dirichlet),
                CellBoundary::Neumann => (n + 1, AxisMode::Neumann),
            };
            let dims = axis_shape(d, count);
            check_size(dims, d, opts)?;
            let origin = [-half * eps; 3];
            let mut modes = [mode; 3];
            modes[d..].iter_mut().for_each(|m| *m = AxisMode::Neumann);
            let mut scaled = [T::zero(); 3];
            Grid::classify(d, h, origin, dims, modes, info, |x| {
                for a in 0..d {
                    scaled[a] = x[a] / eps_eta;
                }
                if shape.contains(&scaled[..d]) {
                    Label::Hole
                } else {
                    Label::Fluid
                }
            })
        }
        Host::TruncatedLattice { r } => {
            let half_width = T::lit(2.0) * r;
            lattice_grid(d, h, half_width, eps, eta, &shape, info, opts)
        }
        Host::Bounded { side } => lattice_grid(d, h, half * side, eps, eta, &shape, info, opts),
    }
}

/// Box `[-L, L]^d` with outer Dirichlet data and a hole in every lattice
/// cell `ε (k + Y)` contained in the box.
#[allow(clippy::too_many_arguments)]
fn lattice_grid<T: Real>(
    d: usize,
    h: T,
    half_width: T,
    eps: T,
    eta: T,
    shape: &HoleShape<T>,
    info: GridInfo,
    opts: &BuildOptions,
) -> Result<Grid<T>> {
    let n = intervals(T::lit(2.0) * half_width, h)?;
    let dims = axis_shape(d, n + 1);
    check_size(dims, d, opts)?;
    let origin = [-half_width; 3];
    let mut modes = [AxisMode::Dirichlet; 3];
    modes[d..].iter_mut().for_each(|m| *m = AxisMode::Neumann);
    let half = T::lit(0.5);
    let slack = T::lit(1e-9) * eps;
    let mut scaled = [T::zero(); 3];
    Grid::classify(d, h, origin, dims, modes, info, |x| {
        for a in 0..d {
            let k = (x[a] / eps).round();
            // the cell must lie inside the box
            if (k * eps).abs() + half * eps > half_width + slack {
                return Label::Fluid;
            }
            scaled[a] = (x[a] / eps - k) / eta;
        }
        if shape.contains(&scaled[..d]) {
            Label::Hole
        } else {
            Label::Fluid
        }
    })
}
