//! Dense reference computations for small operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::multigrid::dense_of;
use crate::calculus::SparseOperator;
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::scalar::Real;

/// Largest dimension the dense oracle accepts.
pub const DENSE_CAP: usize = 4096;

fn check_cap(dim: usize) -> Result<()> {
    if dim > DENSE_CAP {
        Err(Error::DenseCap { dim, cap: DENSE_CAP })
    } else {
        Ok(())
    }
}

/// The operator as a dense `f64` matrix.
pub fn dense_matrix<T: Real>(op: &SparseOperator<T>) -> Result<DMatrix<f64>> {
    check_cap(op.dim())?;
    Ok(dense_of(op))
}

/// Solves `A x = rhs` by Cholesky factorisation.
pub fn dense_solve<T: Real>(op: &SparseOperator<T>, rhs: &[T]) -> Result<Vec<f64>> {
    let m = dense_matrix(op)?;
    if rhs.len() != op.dim() {
        return Err(Error::GridMismatch);
    }
    let chol = m.cholesky().ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    let b = DVector::from_iterator(rhs.len(), rhs.iter().map(|v| v.as_f64()));
    Ok(chol.solve(&b).iter().copied().collect())
}

/// All eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>> {
    check_cap(m.nrows())?;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Full spectrum of the operator, ascending.
pub fn dense_spectrum<T: Real>(op: &SparseOperator<T>) -> Result<Vec<f64>> {
    symmetric_eigenvalues(dense_matrix(op)?)
}

/// Gradient as a dense matrix from fluid unknowns to active edges, with the
/// rows ordered by axis and then by tail node. Returns the matrix and the
/// `(axis, tail)` of each row.
pub fn dense_gradient<T: Real>(grid: &Grid<T>) -> Result<(DMatrix<f64>, Vec<(usize, usize)>)> {
    let nf = grid.fluid_count();
    check_cap(nf)?;
    let inv_h = 1.0 / grid.spacing().as_f64();
    let mut edges = Vec::new();
    for a in 0..grid.dim() {
        for i in 0..grid.node_count() {
            if let Some(j) = grid.neighbor(i, grid.ijk(i), a, true) {
                if grid.is_fluid(i) || grid.is_fluid(j) {
                    edges.push((a, i, j));
                }
            }
        }
    }
    let mut g = DMatrix::zeros(edges.len(), nf);
    for (row, &(_, i, j)) in edges.iter().enumerate() {
        if let Some(k) = grid.fluid_index(j) {
            g[(row, k)] += inv_h;
        }
        if let Some(k) = grid.fluid_index(i) {
            g[(row, k)] -= inv_h;
        }
    }
    Ok((g, edges.into_iter().map(|(a, i, _)| (a, i)).collect()))
}

/// Largest singular value of a dense matrix.
pub fn largest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::assemble_laplacian;
    use crate::geometry::{build_plain_box, BuildOptions};
    use std::sync::Arc;

    #[test]
    fn identity_returns_rhs() {
        let g = Arc::new(build_plain_box(2, 1.0, 0.25, &BuildOptions::unchecked()).unwrap());
        let rows = (0..g.fluid_count()).map(|i| vec![(i, 1.0)]).collect();
        let id = SparseOperator::from_rows(g, rows).unwrap();
        let b: Vec<f64> = (0..id.dim()).map(|i| i as f64 - 3.5).collect();
        assert_eq!(dense_solve(&id, &b).unwrap(), b);
    }

    #[test]
    fn cap_is_enforced() {
        let g = Arc::new(build_plain_box(2, 1.0, 1.0 / 80.0, &BuildOptions::unchecked()).unwrap());
        let a = assemble_laplacian(&g).unwrap();
        assert!(matches!(dense_solve(&a, &vec![1.0; a.dim()]), Err(Error::DenseCap { .. })));
    }

    #[test]
    fn gradient_gram_is_laplacian() {
        let g = Arc::new(build_plain_box(2, 1.0, 0.125, &BuildOptions::unchecked()).unwrap());
        let a = dense_matrix(&assemble_laplacian(&g).unwrap()).unwrap();
        let (grad, _) = dense_gradient(&g).unwrap();
        let gtg = grad.transpose() * &grad;
        assert!((gtg - a).abs().max() < 1e-9);
    }
}
