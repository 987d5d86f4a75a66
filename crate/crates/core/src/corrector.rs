//! The periodic cell corrector `χ_η`, its statistics, and the cutoff
//! functions used to build extremal data on the lattice.
//!
//! `χ_η` solves `-Δχ = η^{d-2}` in the unit cell minus `ηT`, is periodic
//! across the cell faces and vanishes on the hole.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{assemble_laplacian, gradient, ScalarField, SparseOperator};
use crate::error::{Error, Result};
use crate::geometry::{build_cell_grid, BuildOptions, CellBoundary, Grid, HoleShape, Spacing};
use crate::linsolve::{smallest_eigenvalue_with, EigenOptions, Solver, SolverOptions, SpectralEstimate};
use crate::scalar::Real;

/// Map key for an exponent: the shortest decimal that round-trips.
pub fn p_key(p: f64) -> String {
    format!("{p}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    pub solver: SolverOptions,
    pub build: BuildOptions,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self { solver: SolverOptions { tol: 1e-10, ..SolverOptions::default() }, build: BuildOptions::default() }
    }
}

/// A unit cell with hole `ηT`, its operator and a ready preconditioned solver.
pub struct CellProblem<T = f64> {
    shape: HoleShape<T>,
    eta: T,
    d: usize,
    boundary: CellBoundary,
    grid: Arc<Grid<T>>,
    solver: Solver<T>,
}

impl<T: Real> CellProblem<T> {
    pub fn new(
        shape: &HoleShape<T>,
        eta: T,
        h: T,
        d: usize,
        boundary: CellBoundary,
        opts: &CellOptions,
    ) -> Result<Self> {
        let grid = Arc::new(build_cell_grid(shape, eta, h, boundary, d, &opts.build)?);
        let op = Arc::new(assemble_laplacian(&grid)?);
        let solver = Solver::new(op, opts.solver)?;
        Ok(Self { shape: *shape, eta, d, boundary, grid, solver })
    }

    pub fn periodic(shape: &HoleShape<T>, eta: T, h: T, d: usize, opts: &CellOptions) -> Result<Self> {
        Self::new(shape, eta, h, d, CellBoundary::Periodic, opts)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn operator(&self) -> &Arc<SparseOperator<T>> {
        self.solver.operator()
    }

    pub fn solver(&self) -> &Solver<T> {
        &self.solver
    }

    pub fn shape(&self) -> &HoleShape<T> {
        &self.shape
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn boundary(&self) -> CellBoundary {
        self.boundary
    }

    /// Measure of the fluid part of the cell.
    pub fn fluid_measure(&self) -> f64 {
        self.grid.fluid_count() as f64 * self.grid.cell_volume().as_f64()
    }

    /// Solves the corrector problem with the load multiplied by `load_scale`
    /// and evaluates norms for every exponent in `p_set` (and `p = 2`).
    pub fn corrector(&self, p_set: &[f64], load_scale: T) -> Result<CorrectorResult<T>> {
        let load = self.eta.powi(self.d as i32 - 2) * load_scale;
        let rhs = vec![load; self.grid.fluid_count()];
        let rep = self.solver.solve(&rhs)?;
        let chi = rep.solution;
        let grad = gradient(&chi);
        let grad_sq = grad.inner(&grad)?.as_f64();
        let integral = chi.integral().as_f64();
        let mut ps: Vec<f64> = p_set.to_vec();
        ps.push(2.0);
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let mut grad_norms = BTreeMap::new();
        let mut chi_norms = BTreeMap::new();
        for &p in &ps {
            grad_norms.insert(p_key(p), grad.lp_norm(p)?.as_f64());
            chi_norms.insert(p_key(p), chi.lp_norm(p)?.as_f64());
        }
        Ok(CorrectorResult {
            eta: self.eta.as_f64(),
            d: self.d,
            h: self.grid.spacing().as_f64(),
            load: load.as_f64(),
            integral,
            grad_sq,
            fluid_measure: self.fluid_measure(),
            grad_norms,
            chi_norms,
            iterations: rep.iterations,
            relative_residual: rep.relative_residual,
            chi,
        })
    }

    pub fn smallest_eigenvalue(&self, opts: &EigenOptions) -> Result<SpectralEstimate<T>> {
        smallest_eigenvalue_with(&self.solver, opts)
    }
}

/// The corrector together with its integral and norms.
#[derive(Debug, Clone)]
pub struct CorrectorResult<T = f64> {
    pub chi: ScalarField<T>,
    pub eta: f64,
    pub d: usize,
    pub h: f64,
    /// Right-hand side actually used, `η^{d-2}` times any load scale.
    pub load: f64,
    /// `∫_Y χ`.
    pub integral: f64,
    /// `‖∇χ‖_2^2`.
    pub grad_sq: f64,
    pub fluid_measure: f64,
    pub grad_norms: BTreeMap<String, f64>,
    pub chi_norms: BTreeMap<String, f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl<T: Real> CorrectorResult<T> {
    pub fn grad_norm(&self, p: f64) -> Option<f64> {
        self.grad_norms.get(&p_key(p)).copied()
    }

    pub fn chi_norm(&self, p: f64) -> Option<f64> {
        self.chi_norms.get(&p_key(p)).copied()
    }

    /// Relative defect of `‖∇χ‖² = load · ∫χ`.
    pub fn green_defect(&self) -> f64 {
        let rhs = self.load * self.integral;
        if self.grad_sq == 0.0 && rhs == 0.0 {
            return 0.0;
        }
        (self.grad_sq - rhs).abs() / self.grad_sq.abs().max(rhs.abs())
    }

    pub fn summary(&self) -> CorrectorSummary {
        CorrectorSummary {
            eta: self.eta,
            d: self.d,
            h: self.h,
            integral: self.integral,
            grad_norms: self.grad_norms.clone(),
            chi_norms: self.chi_norms.clone(),
            green_defect: self.green_defect(),
            iterations: self.iterations,
        }
    }
}

/// Serializable statistics of one cell solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSummary {
    pub eta: f64,
    pub d: usize,
    pub h: f64,
    pub integral: f64,
    pub grad_norms: BTreeMap<String, f64>,
    pub chi_norms: BTreeMap<String, f64>,
    pub green_defect: f64,
    pub iterations: usize,
}

/// Solves the periodic corrector problem.
pub fn solve_corrector<T: Real>(
    shape: &HoleShape<T>,
    eta: T,
    h: T,
    d: usize,
    p_set: &[f64],
    opts: &CellOptions,
) -> Result<CorrectorResult<T>> {
    CellProblem::periodic(shape, eta, h, d, opts)?.corrector(p_set, T::one())
}

/// One row per `η`, ordered by decreasing `η`.
pub fn corrector_scaling_report(
    etas: &[f64],
    shape: &HoleShape<f64>,
    d: usize,
    p_set: &[f64],
    spacing: Spacing,
    opts: &CellOptions,
) -> Result<Vec<CorrectorSummary>> {
    if etas.len() < 3 {
        return Err(Error::Config(format!("a scaling report needs at least 3 eta values, got {}", etas.len())));
    }
    let mut sorted = etas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(sorted.len());
    for &eta in &sorted {
        let h = spacing.h_for(&opts.build.resolution, 1.0, eta, shape.c0);
        match solve_corrector(shape, eta, h, d, p_set, opts) {
            Ok(r) => rows.push(r.summary()),
            Err(e) => {
                return Err(Error::Aborted {
                    completed: rows.len(),
                    message: format!("cell solve at eta = {eta} failed: {e}"),
                })
            }
        }
    }
    Ok(rows)
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` clamped to `[0, 1]`.
pub fn smoothstep<T: Real>(t: T) -> T {
    let t = t.max(T::zero()).min(T::one());
    t * t * t * (t * (t * T::lit(6.0) - T::lit(15.0)) + T::lit(10.0))
}

/// Radial cutoff: 1 on `B(0, R)`, 0 outside `B(0, 2R)`.
pub fn bump_profile<T: Real>(r: T, radius: T) -> T {
    T::one() - smoothstep((radius - r) / r)
}

/// Supported cutoff families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CutoffSpec<T> {
    /// Quintic smoothstep between radii `R` and `2R`.
    Bump { r: T },
    /// `1 - ln|x| / ln(C0 η)` on the annulus `C0 η < |x| < 1/2`, periodic.
    Log { c0: T, eta: T },
}

impl<T: Real> CutoffSpec<T> {
    pub fn evaluate(&self, grid: &Arc<Grid<T>>) -> Result<ScalarField<T>> {
        match *self {
            CutoffSpec::Bump { r } => cutoff_bump(r, grid),
            CutoffSpec::Log { c0, eta } => log_cutoff_psi(eta, c0, grid),
        }
    }
}

/// Samples the quintic bump of radius `R` on `grid`, which must reach `2R`.
pub fn cutoff_bump<T: Real>(r: T, grid: &Arc<Grid<T>>) -> Result<ScalarField<T>> {
    if !(r > T::zero()) {
        return Err(Error::Config(format!("cutoff radius must be positive, got {r}")));
    }
    let two_r = T::lit(2.0) * r;
    let slack = grid.spacing() * T::lit(1e-9);
    let (o, s, h) = (grid.origin(), grid.shape(), grid.spacing());
    for a in 0..grid.dim() {
        let hi = o[a] + h * T::from_usize_lossy(s[a] - 1);
        if o[a] > -two_r + slack || hi < two_r - slack {
            return Err(Error::Config(format!("grid does not reach radius 2R = {two_r} along axis {a}")));
        }
    }
    let d = grid.dim();
    Ok(ScalarField::from_fn(grid.clone(), |x| {
        let rad = x[..d].iter().map(|&v| v * v).sum::<T>().sqrt();
        bump_profile(r, rad)
    }))
}

/// Default log-cutoff constant: `max(1, 2 · circumradius(T))`, so that
/// `ηT ⊂ B(0, C0 η)`.
pub fn default_log_c0<T: Real>(shape: &HoleShape<T>, d: usize) -> T {
    (T::lit(2.0) * shape.circumradius(d)).max(T::one())
}

/// The planar logarithmic cutoff, extended periodically with period 1
/// (scaled by the grid's `ε`).
pub fn log_cutoff_psi<T: Real>(eta: T, c0: T, grid: &Arc<Grid<T>>) -> Result<ScalarField<T>> {
    if grid.dim() != 2 {
        return Err(Error::Config("the logarithmic cutoff is defined for d = 2 only".into()));
    }
    let a = c0 * eta;
    if !(a > T::zero() && a < T::lit(0.25)) {
        return Err(Error::Config(format!("need 0 < C0·eta < 1/4, got {a}")));
    }
    let eps = T::lit(grid.info().epsilon);
    let la = a.ln();
    let half = T::lit(0.5);
    Ok(ScalarField::from_fn(grid.clone(), |x| {
        let y: Vec<T> = x[..2].iter().map(|&v| v / eps - (v / eps).round()).collect();
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if r <= a {
            T::zero()
        } else {
            T::one() - r.min(half).ln() / la
        }
    }))
}

/// The corrector repeated periodically onto a lattice grid whose spacing in
/// cell units matches the cell grid.
pub fn tile_corrector<T: Real>(corr: &CorrectorResult<T>, lattice: &Arc<Grid<T>>) -> Result<ScalarField<T>> {
    let cell = corr.chi.grid();
    if cell.dim() != lattice.dim() {
        return Err(Error::GridMismatch);
    }
    let eps = T::lit(lattice.info().epsilon);
    let hc = cell.spacing();
    if ((lattice.spacing() / eps - hc) / hc).abs() > T::lit(1e-9) {
        return Err(Error::GridMismatch);
    }
    let n = cell.shape();
    let d = lattice.dim();
    let half = T::lit(0.5);
    let mut values = Vec::with_capacity(lattice.fluid_count());
    for &node in lattice.fluid_nodes() {
        let x = lattice.coords(node as usize);
        let mut c = [0usize; 3];
        for a in 0..d {
            let y = x[a] / eps - (x[a] / eps).round();
            let fj = (y + half) / hc;
            let j = fj.round();
            if (fj - j).abs() > T::lit(1e-6) {
                return Err(Error::GridMismatch);
            }
            c[a] = (j.to_i64().unwrap_or(0)).rem_euclid(n[a] as i64) as usize;
        }
        values.push(corr.chi.at_node(cell.index(c)));
    }
    ScalarField::from_values(lattice.clone(), values)
}

/// `χ_η φ` on the lattice grid carrying `cutoff`.
pub fn extremal_function<T: Real>(corr: &CorrectorResult<T>, cutoff: &ScalarField<T>) -> Result<ScalarField<T>> {
    let mut tiled = tile_corrector(corr, cutoff.grid())?;
    for (v, c) in tiled.values_mut().iter_mut().zip(cutoff.values()) {
        *v *= *c;
    }
    Ok(tiled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_plain_box, Label};

    fn cell(eta: f64, h: f64, d: usize) -> CellProblem {
        let opts = CellOptions { build: BuildOptions::unchecked(), ..CellOptions::default() };
        CellProblem::periodic(&HoleShape::ball(0.25).unwrap(), eta, h, d, &opts).unwrap()
    }

    #[test]
    fn zero_load_gives_zero_corrector() {
        let c = cell(0.5, 1.0 / 32.0, 2).corrector(&[3.0], 0.0).unwrap();
        assert!(c.chi.values().iter().all(|&v| v == 0.0));
        assert_eq!(c.integral, 0.0);
    }

    #[test]
    fn green_identity_and_sign() {
        for d in [2, 3] {
            let c = cell(0.5, 1.0 / 16.0, d).corrector(&[1.5, 4.0], 1.0).unwrap();
            assert!(c.green_defect() <= 1e-9, "d={d}: {}", c.green_defect());
            assert!(c.chi.values().iter().all(|&v| v >= 0.0));
            assert!(c.grad_norm(4.0).is_some() && c.chi_norm(1.5).is_some());
        }
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(bump_profile(2.0, 0.0), 1.0);
        assert_eq!(bump_profile(2.0, 4.0), 0.0);
        assert_eq!(bump_profile(2.0, 9.0), 0.0);
    }

    #[test]
    fn bump_requires_room() {
        let g = Arc::new(build_plain_box(2, 4.0, 0.25, &BuildOptions::unchecked()).unwrap());
        assert!(cutoff_bump(2.0, &g).is_err());
        assert!(cutoff_bump(1.0, &g).is_ok());
    }

    #[test]
    fn log_cutoff_branches() {
        let c = cell(0.125, 1.0 / 64.0, 2);
        let c0 = 1.0;
        let psi = log_cutoff_psi(0.125, c0, c.grid()).unwrap();
        let g = c.grid();
        for (k, &n) in g.fluid_nodes().iter().enumerate() {
            let x = g.coords(n as usize);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let v = psi.values()[k];
            assert!((0.0..=1.0 + 1e-12 - (0.5f64).ln() / (0.125f64).ln()).contains(&v));
            if r <= 0.125 {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(g.label(g.index([32, 32, 0])), Label::Hole);
        assert!(log_cutoff_psi(0.3, 1.0, c.grid()).is_err());
    }
}
