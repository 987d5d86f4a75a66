//! Geometric multigrid V-cycle used as a CG preconditioner.
//!
//! Coarse grids take every other node. A coarse node is Dirichlet when any
//! fine node in its `3^d` neighbourhood is, which keeps every coarse operator
//! nonsingular. Coarse operators are rediscretised at `2h`, prolongation is
//! `d`-linear and restriction is `2^{-d} P^T`. Red-black Gauss-Seidel before
//! the coarse correction and the reversed sweep after it keep the cycle
//! symmetric.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::calculus::{assemble_unchecked, SparseOperator};
use crate::error::{Error, Result};
use crate::geometry::{AxisMode, Grid, Label};
use crate::scalar::Real;

/// Coarsening stops once a level has at most this many unknowns.
pub const COARSE_DIRECT_MAX: usize = 1200;
const COARSE_SWEEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultigridOptions {
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
    pub max_levels: usize,
}

impl Default for MultigridOptions {
    fn default() -> Self {
        Self { pre_sweeps: 1, post_sweeps: 1, max_levels: 24 }
    }
}

/// `d`-linear interpolation from a coarse level, one row per fine unknown.
#[derive(Debug, Clone)]
struct Prolongation<T> {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<T>,
    coarse_dim: usize,
}

impl<T: Real> Prolongation<T> {
    fn apply_add(&self, coarse: &[T], fine: &mut [T]) {
        for (i, f) in fine.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.weights[k] * coarse[self.cols[k] as usize];
            }
            *f += s;
        }
    }

    fn restrict(&self, fine: &[T], coarse: &mut [T], scale: T) {
        coarse.iter_mut().for_each(|c| *c = T::zero());
        for (i, &f) in fine.iter().enumerate() {
            let v = f * scale;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                coarse[self.cols[k] as usize] += self.weights[k] * v;
            }
        }
    }
}

#[derive(Debug)]
struct Level<T> {
    op: SparseOperator<T>,
    inv_diag: Vec<T>,
    /// Unknowns by colour (parity of `i + j + k`).
    colors: [Vec<u32>; 2],
    /// Interpolation from the next coarser level.
    prolong: Option<Prolongation<T>>,
}

#[derive(Debug)]
enum CoarseSolver {
    /// Dense Cholesky factor in `f64`.
    Direct(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sweeps,
}

/// Multigrid hierarchy for one operator.
#[derive(Debug)]
pub struct Multigrid<T> {
    levels: Vec<Level<T>>,
    coarse: CoarseSolver,
    opts: MultigridOptions,
    restrict_scale: T,
}

fn colors_of<T: Real>(grid: &Grid<T>) -> [Vec<u32>; 2] {
    let mut colors = [Vec::new(), Vec::new()];
    for (k, &n) in grid.fluid_nodes().iter().enumerate() {
        let c = grid.ijk(n as usize);
        colors[(c[0] + c[1] + c[2]) % 2].push(k as u32);
    }
    colors
}

/// Next coarser grid, or `None` when the extents do not halve.
fn coarsen<T: Real>(grid: &Grid<T>) -> Option<Grid<T>> {
    let d = grid.dim();
    let shape = grid.shape();
    let mut cshape = shape;
    for a in 0..d {
        let n = shape[a];
        cshape[a] = match grid.mode(a) {
            AxisMode::Periodic if n % 2 == 0 && n >= 4 => n / 2,
            AxisMode::Dirichlet | AxisMode::Neumann if n >= 5 && (n - 1) % 2 == 0 => (n - 1) / 2 + 1,
            _ => return None,
        };
    }
    let total: usize = cshape.iter().product();
    let mut labels = Vec::with_capacity(total);
    for k in 0..cshape[2] {
        for j in 0..cshape[1] {
            for i in 0..cshape[0] {
                let centre = [2 * i, 2 * j, 2 * k];
                labels.push(if neighbourhood_is_fluid(grid, centre) { Label::Fluid } else { Label::Hole });
            }
        }
    }
    // keep the exterior tag on Dirichlet walls for bookkeeping
    for (idx, l) in labels.iter_mut().enumerate() {
        let c = [idx % cshape[0], (idx / cshape[0]) % cshape[1], idx / (cshape[0] * cshape[1])];
        if (0..d).any(|a| grid.mode(a) == AxisMode::Dirichlet && (c[a] == 0 || c[a] + 1 == cshape[a])) {
            *l = Label::Exterior;
        }
    }
    let h = grid.spacing() * T::lit(2.0);
    Grid::from_labels(d, h, grid.origin(), cshape, grid.modes(), grid.info(), labels).ok()
}

fn neighbourhood_is_fluid<T: Real>(grid: &Grid<T>, centre: [usize; 3]) -> bool {
    let d = grid.dim();
    let shape = grid.shape();
    let offsets: &[isize] = &[-1, 0, 1];
    let mut c = [0usize; 3];
    let zs: &[isize] = if d == 3 { offsets } else { &[0] };
    for &dz in zs {
        for &dy in offsets {
            for &dx in offsets {
                let off = [dx, dy, dz];
                for a in 0..3 {
                    let n = shape[a] as isize;
                    let mut v = centre[a] as isize + if a < d { off[a] } else { 0 };
                    if v < 0 || v >= n {
                        if a < d && grid.mode(a) == AxisMode::Periodic {
                            v = v.rem_euclid(n);
                        } else {
                            v = v.clamp(0, n - 1);
                        }
                    }
                    c[a] = v as usize;
                }
                if !grid.is_fluid(grid.index(c)) {
                    return false;
                }
            }
        }
    }
    true
}

fn build_prolongation<T: Real>(fine: &Grid<T>, coarse: &Grid<T>) -> Prolongation<T> {
    let d = fine.dim();
    let cshape = coarse.shape();
    let half = T::lit(0.5);
    let mut row_ptr = Vec::with_capacity(fine.fluid_count() + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    row_ptr.push(0);
    for &node in fine.fluid_nodes() {
        let c = fine.ijk(node as usize);
        // per axis: up to two (coarse coordinate, weight) pairs
        let mut opts = [[(0usize, T::one()); 2]; 3];
        let mut counts = [1usize; 3];
        for a in 0..d {
            if c[a] % 2 == 0 {
                opts[a][0] = (c[a] / 2, T::one());
            } else {
                let hi = if (c[a] + 1) / 2 >= cshape[a] { 0 } else { (c[a] + 1) / 2 };
                opts[a] = [((c[a] - 1) / 2, half), (hi, half)];
                counts[a] = 2;
            }
        }
        for z in 0..counts[2] {
            for y in 0..counts[1] {
                for x in 0..counts[0] {
                    let (cx, wx) = opts[0][x];
                    let (cy, wy) = opts[1][y];
                    let (cz, wz) = opts[2][z];
                    if let Some(j) = coarse.fluid_index(coarse.index([cx, cy, cz])) {
                        cols.push(j as u32);
                        weights.push(wx * wy * wz);
                    }
                }
            }
        }
        row_ptr.push(cols.len());
    }
    Prolongation { row_ptr, cols, weights, coarse_dim: coarse.fluid_count() }
}

pub(crate) fn dense_of<T: Real>(op: &SparseOperator<T>) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in op.row(i) {
            m[(i, j)] += v.as_f64();
        }
    }
    m
}

impl<T: Real> Multigrid<T> {
    pub fn new(op: &SparseOperator<T>, opts: MultigridOptions) -> Result<Self> {
        let mut levels = vec![Level {
            inv_diag: op.diagonal().iter().map(|&d| T::one() / d).collect(),
            colors: colors_of(op.grid()),
            op: op.clone(),
            prolong: None,
        }];
        while levels.len() < opts.max_levels {
            let last = levels.last().unwrap();
            if last.op.dim() <= COARSE_DIRECT_MAX {
                break;
            }
            let fine_grid = last.op.grid().clone();
            let Some(cgrid) = coarsen(&fine_grid) else { break };
            let cgrid = Arc::new(cgrid);
            let prolong = build_prolongation(&fine_grid, &cgrid);
            let cop = assemble_unchecked(&cgrid);
            levels.last_mut().unwrap().prolong = Some(prolong);
            levels.push(Level {
                inv_diag: cop.diagonal().iter().map(|&d| T::one() / d).collect(),
                colors: colors_of(&cgrid),
                op: cop,
                prolong: None,
            });
        }
        let bottom = &levels.last().unwrap().op;
        let coarse = if bottom.dim() <= COARSE_DIRECT_MAX {
            let m = dense_of(bottom);
            match m.cholesky() {
                Some(c) => CoarseSolver::Direct(c),
                None => return Err(Error::Singular("coarse multigrid operator is not positive definite".into())),
            }
        } else {
            CoarseSolver::Sweeps
        };
        let restrict_scale = T::one() / T::lit(2f64.powi(op.grid().dim() as i32));
        Ok(Self { levels, coarse, opts, restrict_scale })
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.op.dim()).collect()
    }

    /// `z = M^{-1} r` with one V-cycle from a zero initial guess.
    pub fn apply(&self, r: &[T], z: &mut [T]) {
        z.iter_mut().for_each(|v| *v = T::zero());
        self.vcycle(0, r, z);
    }

    fn vcycle(&self, l: usize, b: &[T], x: &mut [T]) {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            self.coarse_solve(level, b, x);
            return;
        }
        for _ in 0..self.opts.pre_sweeps {
            gs_sweep(level, b, x, false);
        }
        let mut r = vec![T::zero(); level.op.dim()];
        level.op.residual(b, x, &mut r);
        let p = level.prolong.as_ref().expect("prolongation between levels");
        let mut rc = vec![T::zero(); p.coarse_dim];
        p.restrict(&r, &mut rc, self.restrict_scale);
        let mut ec = vec![T::zero(); p.coarse_dim];
        self.vcycle(l + 1, &rc, &mut ec);
        p.apply_add(&ec, x);
        for _ in 0..self.opts.post_sweeps {
            gs_sweep(level, b, x, true);
        }
    }

    fn coarse_solve(&self, level: &Level<T>, b: &[T], x: &mut [T]) {
        match &self.coarse {
            CoarseSolver::Direct(chol) => {
                let rhs = DVector::from_iterator(b.len(), b.iter().map(|v| v.as_f64()));
                let sol = chol.solve(&rhs);
                for (xi, s) in x.iter_mut().zip(sol.iter()) {
                    *xi = T::lit(*s);
                }
            }
            CoarseSolver::Sweeps => {
                for _ in 0..COARSE_SWEEPS {
                    gs_sweep(level, b, x, false);
                }
                for _ in 0..COARSE_SWEEPS {
                    gs_sweep(level, b, x, true);
                }
            }
        }
    }
}

/// One Gauss-Seidel sweep, red then black, or the exact reverse order.
fn gs_sweep<T: Real>(level: &Level<T>, b: &[T], x: &mut [T], reverse: bool) {
    let op = &level.op;
    let (rp, cols, vals) = (op.row_ptr(), op.cols(), op.vals());
    let mut relax = |i: usize| {
        let mut s = b[i];
        for k in rp[i]..rp[i + 1] {
            let j = cols[k] as usize;
            if j != i {
                s -= vals[k] * x[j];
            }
        }
        x[i] = s * level.inv_diag[i];
    };
    if reverse {
        for color in level.colors.iter().rev() {
            for &i in color.iter().rev() {
                relax(i as usize);
            }
        }
    } else {
        for color in &level.colors {
            for &i in color {
                relax(i as usize);
            }
        }
    }
}
