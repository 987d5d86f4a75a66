//! Discrete calculus on labelled grids.
//!
//! Scalars live on fluid nodes and are extended by zero elsewhere. Vector
//! fields live on the forward edges of every node: component `a` at node `i`
//! is the value on the edge `i -> i + e_a`. An edge is active when it exists
//! and touches at least one fluid node; inactive edges always hold zero.
//!
//! Gradient is the forward difference and divergence is its exact negative
//! adjoint in the `h^d`-weighted inner products, so `A = -div grad` is the
//! usual `(2d+1)`-point Laplacian with Dirichlet nodes eliminated.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::scalar::{pairwise_sum_by, Real};

/// Rows above this count use the rayon pool for products.
pub(crate) const PAR_THRESHOLD: usize = 1 << 15;

/// Values on the fluid nodes of a grid.
#[derive(Debug, Clone)]
pub struct ScalarField<T = f64> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let n = grid.fluid_count();
        Self { grid, values: vec![T::zero(); n] }
    }

    pub fn from_values(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.fluid_count() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the coordinates of every fluid node.
    pub fn from_fn(grid: Arc<Grid<T>>, mut f: impl FnMut([T; 3]) -> T) -> Self {
        let values = grid.fluid_nodes().iter().map(|&n| f(grid.coords(n as usize))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Self {
        let n = grid.fluid_count();
        Self { grid, values: vec![c; n] }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value at a grid node, zero off the fluid set.
    pub fn at_node(&self, idx: usize) -> T {
        self.grid.fluid_index(idx).map_or(T::zero(), |k| self.values[k])
    }

    /// Full-grid array with zeros on hole and exterior nodes.
    pub fn to_full(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.grid.node_count()];
        for (k, &n) in self.grid.fluid_nodes().iter().enumerate() {
            out[n as usize] = self.values[k];
        }
        out
    }

    pub fn scale(&mut self, c: T) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `h^d * sum(values)`.
    pub fn integral(&self) -> T {
        pairwise_sum_by(self.values.len(), &|i| self.values[i]) * self.grid.cell_volume()
    }

    /// `h^d`-weighted inner product.
    pub fn inner(&self, other: &Self) -> Result<T> {
        check_same(&self.grid, &other.grid)?;
        let (a, b) = (&self.values, &other.values);
        Ok(pairwise_sum_by(a.len(), &|i| a[i] * b[i]) * self.grid.cell_volume())
    }

    pub fn lp_norm(&self, p: f64) -> Result<T> {
        lp_norm_slice(&self.values, p, self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Edge-valued field; `components[a][i]` lives on the edge `i -> i + e_a`.
#[derive(Debug, Clone)]
pub struct VectorField<T = f64> {
    grid: Arc<Grid<T>>,
    components: Vec<Vec<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let n = grid.node_count();
        let components = vec![vec![T::zero(); n]; grid.dim()];
        Self { grid, components }
    }

    /// Builds a field from per-edge values; inactive edges are zeroed.
    pub fn from_components(grid: Arc<Grid<T>>, mut components: Vec<Vec<T>>) -> Result<Self> {
        if components.len() != grid.dim() || components.iter().any(|c| c.len() != grid.node_count()) {
            return Err(Error::GridMismatch);
        }
        for (a, comp) in components.iter_mut().enumerate() {
            for (i, v) in comp.iter_mut().enumerate() {
                if edge_head(&grid, i, a).is_none() {
                    *v = T::zero();
                }
            }
        }
        Ok(Self { grid, components })
    }

    /// Samples `f(midpoint, axis)` on every active edge.
    pub fn from_fn(grid: Arc<Grid<T>>, mut f: impl FnMut([T; 3], usize) -> T) -> Self {
        let mut out = Self::zeros(grid.clone());
        let half = T::lit(0.5) * grid.spacing();
        for a in 0..grid.dim() {
            for i in 0..grid.node_count() {
                if edge_head(&grid, i, a).is_some() {
                    let mut x = grid.coords(i);
                    x[a] += half;
                    out.components[a][i] = f(x, a);
                }
            }
        }
        out
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &[T] {
        &self.components[axis]
    }

    pub fn scale(&mut self, c: T) {
        self.components.iter_mut().flatten().for_each(|v| *v *= c);
    }

    /// `h^d`-weighted edge inner product.
    pub fn inner(&self, other: &Self) -> Result<T> {
        check_same(&self.grid, &other.grid)?;
        let mut total = T::zero();
        for (a, b) in self.components.iter().zip(&other.components) {
            total += pairwise_sum_by(a.len(), &|i| a[i] * b[i]);
        }
        Ok(total * self.grid.cell_volume())
    }

    /// Euclidean magnitude at each node, over the node's forward edges.
    pub fn magnitudes(&self) -> Vec<T> {
        let n = self.grid.node_count();
        (0..n)
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<T>().sqrt())
            .collect()
    }

    pub fn lp_norm(&self, p: f64) -> Result<T> {
        lp_norm_slice(&self.magnitudes(), p, self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> T {
        self.magnitudes().into_iter().fold(T::zero(), T::max)
    }
}

/// Head of the edge `idx -> idx + e_axis` if that edge is active.
#[inline]
fn edge_head<T: Real>(grid: &Grid<T>, idx: usize, axis: usize) -> Option<usize> {
    let head = grid.neighbor(idx, grid.ijk(idx), axis, true)?;
    (grid.is_fluid(idx) || grid.is_fluid(head)).then_some(head)
}

fn check_same<T: Real>(a: &Arc<Grid<T>>, b: &Arc<Grid<T>>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_layout(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Discrete `-Δ` on the fluid nodes in compressed row form.
#[derive(Debug, Clone)]
pub struct SparseOperator<T = f64> {
    grid: Arc<Grid<T>>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    diag: Vec<T>,
}

impl<T: Real> SparseOperator<T> {
    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn vals(&self) -> &[T] {
        &self.vals
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `i` as `(column, value)`, diagonal included.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map_or(T::zero(), |(_, v)| v)
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[T]) -> T {
        let mut s = T::zero();
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.vals[k] * x[self.cols[k] as usize];
        }
        s
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        if self.dim() >= PAR_THRESHOLD {
            y.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
                for (o, yi) in chunk.iter_mut().enumerate() {
                    *yi = self.row_dot(c * 4096 + o, x);
                }
            });
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(i, x);
            }
        }
    }

    pub fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// `r = b - A x`.
    pub fn residual(&self, b: &[T], x: &[T], r: &mut [T]) {
        if self.dim() >= PAR_THRESHOLD {
            r.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
                for (o, ri) in chunk.iter_mut().enumerate() {
                    let i = c * 4096 + o;
                    *ri = b[i] - self.row_dot(i, x);
                }
            });
        } else {
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = b[i] - self.row_dot(i, x);
            }
        }
    }

    /// Whether the stored matrix equals its transpose entry by entry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim()).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// The same operator with rows and columns permuted: new index `perm[i]`
    /// holds old index `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        if perm.len() != n {
            return Err(Error::Config("permutation length mismatch".into()));
        }
        let mut inv = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inv[new] != usize::MAX {
                return Err(Error::Config("not a permutation".into()));
            }
            inv[new] = old;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for &old in &inv {
            let mut entries: Vec<(u32, T)> = self.row(old).map(|(c, v)| (perm[c] as u32, v)).collect();
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        let diag = inv.iter().map(|&old| self.diag[old]).collect();
        Ok(Self { grid: self.grid.clone(), row_ptr, cols, vals, diag })
    }

    /// Builds an operator from explicit rows (used by tests and oracles).
    pub fn from_rows(grid: Arc<Grid<T>>, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(rows.len());
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut d = T::zero();
            for (c, v) in row {
                if c == i {
                    d += v;
                }
                cols.push(c as u32);
                vals.push(v);
            }
            diag.push(d);
            row_ptr.push(cols.len());
        }
        Ok(Self { grid, row_ptr, cols, vals, diag })
    }
}

/// Assembles `-Δ` on the fluid nodes of `grid`.
///
/// Errors with [`Error::Singular`] when some connected fluid component has
/// no edge into a Dirichlet node.
pub fn assemble_laplacian<T: Real>(grid: &Arc<Grid<T>>) -> Result<SparseOperator<T>> {
    check_pinned(grid)?;
    Ok(assemble_unchecked(grid))
}

pub(crate) fn assemble_unchecked<T: Real>(grid: &Arc<Grid<T>>) -> SparseOperator<T> {
    let h = grid.spacing();
    let w = T::one() / (h * h);
    let d = grid.dim();
    let nf = grid.fluid_count();
    let mut row_ptr = Vec::with_capacity(nf + 1);
    let mut cols = Vec::with_capacity(nf * (2 * d + 1));
    let mut vals = Vec::with_capacity(nf * (2 * d + 1));
    let mut diag = Vec::with_capacity(nf);
    let mut entries: Vec<(u32, T)> = Vec::with_capacity(2 * d + 1);
    row_ptr.push(0);
    for (k, &node) in grid.fluid_nodes().iter().enumerate() {
        let node = node as usize;
        let c = grid.ijk(node);
        let mut edges = 0usize;
        entries.clear();
        for a in 0..d {
            for fwd in [true, false] {
                let Some(nb) = grid.neighbor(node, c, a, fwd) else { continue };
                if nb == node {
                    // a one-node periodic axis: the edge is a self loop
                    continue;
                }
                edges += 1;
                if let Some(j) = grid.fluid_index(nb) {
                    match entries.iter_mut().find(|e| e.0 == j as u32) {
                        Some(e) => e.1 -= w,
                        None => entries.push((j as u32, -w)),
                    }
                }
            }
        }
        let dk = w * T::from_usize_lossy(edges);
        entries.push((k as u32, dk));
        entries.sort_by_key(|e| e.0);
        for &(c, v) in &entries {
            cols.push(c);
            vals.push(v);
        }
        diag.push(dk);
        row_ptr.push(cols.len());
    }
    SparseOperator { grid: grid.clone(), row_ptr, cols, vals, diag }
}

/// Every connected fluid component must touch a Dirichlet node.
fn check_pinned<T: Real>(grid: &Grid<T>) -> Result<()> {
    let nf = grid.fluid_count();
    let mut seen = vec![false; nf];
    let mut queue = VecDeque::new();
    for start in 0..nf {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut pinned = false;
        let mut size = 0usize;
        while let Some(k) = queue.pop_front() {
            size += 1;
            let node = grid.fluid_nodes()[k] as usize;
            let c = grid.ijk(node);
            for a in 0..grid.dim() {
                for fwd in [true, false] {
                    let Some(nb) = grid.neighbor(node, c, a, fwd) else { continue };
                    match grid.fluid_index(nb) {
                        Some(j) if !seen[j] => {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                        Some(_) => {}
                        None => pinned = true,
                    }
                }
            }
        }
        if !pinned {
            return Err(Error::Singular(format!(
                "a connected fluid component of {size} nodes has no Dirichlet neighbour"
            )));
        }
    }
    Ok(())
}

/// Forward-difference gradient with zero extension.
pub fn gradient<T: Real>(u: &ScalarField<T>) -> VectorField<T> {
    let grid = u.grid.clone();
    let full = u.to_full();
    let inv_h = T::one() / grid.spacing();
    let n = grid.node_count();
    let mut components = Vec::with_capacity(grid.dim());
    for a in 0..grid.dim() {
        let mut comp = vec![T::zero(); n];
        let fill = |(i, v): (usize, &mut T)| {
            if let Some(j) = edge_head(&grid, i, a) {
                *v = (full[j] - full[i]) * inv_h;
            }
        };
        if n >= PAR_THRESHOLD {
            comp.par_iter_mut().enumerate().for_each(fill);
        } else {
            comp.iter_mut().enumerate().for_each(fill);
        }
        components.push(comp);
    }
    VectorField { grid, components }
}

/// `(div f)(i) = Σ_a [f_a(i) - f_a(i - e_a)] / h` on fluid nodes; the exact
/// negative adjoint of [`gradient`].
pub fn divergence_adjoint<T: Real>(f: &VectorField<T>) -> ScalarField<T> {
    let grid = f.grid.clone();
    let inv_h = T::one() / grid.spacing();
    let eval = |&node: &u32| {
        let node = node as usize;
        let c = grid.ijk(node);
        let mut s = T::zero();
        for a in 0..grid.dim() {
            let comp = &f.components[a];
            s += comp[node];
            if let Some(prev) = grid.neighbor(node, c, a, false) {
                s -= comp[prev];
            }
        }
        s * inv_h
    };
    let values: Vec<T> = if grid.fluid_count() >= PAR_THRESHOLD {
        grid.fluid_nodes().par_iter().map(eval).collect()
    } else {
        grid.fluid_nodes().iter().map(eval).collect()
    };
    ScalarField { grid, values }
}

/// Load vector for `-Δu = F + div f` (the lumped mass matrix is the identity
/// in the strong form used by [`assemble_laplacian`]).
pub fn rhs_from_data<T: Real>(big_f: &ScalarField<T>, f: &VectorField<T>) -> Result<Vec<T>> {
    check_same(&big_f.grid, &f.grid)?;
    let div = divergence_adjoint(f);
    Ok(big_f.values.iter().zip(&div.values).map(|(a, b)| *a + *b).collect())
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::Exponent(p))
    }
}

/// `(weight * Σ |v|^p)^{1/p}` with the sum scaled by the largest entry and
/// accumulated pairwise for a fixed reduction order.
pub fn lp_norm_slice<T: Real>(values: &[T], p: f64, weight: T) -> Result<T> {
    check_exponent(p)?;
    let m = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if m == T::zero() {
        return Ok(T::zero());
    }
    let pt = T::lit(p);
    let s = pairwise_sum_by(values.len(), &|i| (values[i].abs() / m).powf(pt));
    Ok(m * (weight * s).powf(T::one() / pt))
}

/// Which kind of field [`lp_norm`] measures.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a, T> {
    Scalar(&'a ScalarField<T>),
    Vector(&'a VectorField<T>),
}

/// `L^p` norm of a scalar field or of the pointwise magnitude of a vector field.
pub fn lp_norm<T: Real>(field: FieldRef<'_, T>, p: f64) -> Result<T> {
    match field {
        FieldRef::Scalar(s) => s.lp_norm(p),
        FieldRef::Vector(v) => v.lp_norm(p),
    }
}
