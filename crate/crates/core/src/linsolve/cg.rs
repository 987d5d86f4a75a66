use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::multigrid::{Multigrid, MultigridOptions};
use crate::calculus::{ScalarField, SparseOperator};
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Preconditioner {
    None,
    Jacobi,
    #[default]
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 2000, preconditioner: Preconditioner::Multigrid }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<T = f64> {
    pub solution: ScalarField<T>,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` recomputed from the returned iterate.
    pub relative_residual: f64,
    pub wall_time: f64,
    /// Recursively updated relative residual after each iteration.
    pub history: Vec<f64>,
}

enum Precond<T> {
    Identity,
    Jacobi(Vec<T>),
    Multigrid(Box<Multigrid<T>>),
}

/// Preconditioned conjugate gradients bound to one operator; the
/// preconditioner is built once and reused across solves.
pub struct Solver<T = f64> {
    op: Arc<SparseOperator<T>>,
    precond: Precond<T>,
    opts: SolverOptions,
}

impl<T: Real> Solver<T> {
    pub fn new(op: Arc<SparseOperator<T>>, opts: SolverOptions) -> Result<Self> {
        if !(opts.tol > 0.0 && opts.tol < 1.0) {
            return Err(Error::Config(format!("solver tolerance must lie in (0, 1), got {}", opts.tol)));
        }
        let precond = match opts.preconditioner {
            Preconditioner::None => Precond::Identity,
            Preconditioner::Jacobi => Precond::Jacobi(op.diagonal().iter().map(|&d| T::one() / d).collect()),
            Preconditioner::Multigrid => Precond::Multigrid(Box::new(Multigrid::new(&op, MultigridOptions::default())?)),
        };
        Ok(Self { op, precond, opts })
    }

    pub fn operator(&self) -> &Arc<SparseOperator<T>> {
        &self.op
    }

    pub fn options(&self) -> SolverOptions {
        self.opts
    }

    fn precondition(&self, r: &[T], z: &mut [T]) {
        match &self.precond {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => z.iter_mut().zip(r).zip(inv).for_each(|((z, r), d)| *z = *r * *d),
            Precond::Multigrid(mg) => mg.apply(r, z),
        }
    }

    /// Solves `A x = rhs` to the configured tolerance.
    pub fn solve(&self, rhs: &[T]) -> Result<SolveReport<T>> {
        self.solve_with(rhs, None, self.opts.tol, self.opts.max_iters)
    }

    pub fn solve_with(&self, rhs: &[T], x0: Option<&[T]>, tol: f64, max_iters: usize) -> Result<SolveReport<T>> {
        let start = Instant::now();
        let n = self.op.dim();
        if rhs.len() != n {
            return Err(Error::GridMismatch);
        }
        let bnorm = norm2(rhs).as_f64();
        let grid = self.op.grid().clone();
        if bnorm == 0.0 {
            return Ok(SolveReport {
                solution: ScalarField::zeros(grid),
                iterations: 0,
                relative_residual: 0.0,
                wall_time: start.elapsed().as_secs_f64(),
                history: Vec::new(),
            });
        }
        let mut x = x0.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
        let mut r = vec![T::zero(); n];
        self.op.residual(rhs, &x, &mut r);
        let mut z = vec![T::zero(); n];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut ap = vec![T::zero(); n];
        let mut rz = dot(&r, &z);
        let mut history = Vec::new();
        let mut best = (norm2(&r).as_f64() / bnorm, x.clone());
        let mut it = 0;
        while it < max_iters {
            let rel = norm2(&r).as_f64() / bnorm;
            if rel <= tol {
                // confirm with the true residual before returning
                let mut tr = vec![T::zero(); n];
                self.op.residual(rhs, &x, &mut tr);
                let true_rel = norm2(&tr).as_f64() / bnorm;
                if true_rel <= tol {
                    return Ok(SolveReport {
                        solution: ScalarField::from_values(grid, x)?,
                        iterations: it,
                        relative_residual: true_rel,
                        wall_time: start.elapsed().as_secs_f64(),
                        history,
                    });
                }
                r = tr;
                self.precondition(&r, &mut z);
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
            }
            self.op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > T::zero()) || !(rz > T::zero()) {
                return Err(Error::Singular(format!("CG breakdown at iteration {it} (p·Ap = {pap:e})")));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            it += 1;
            let rel = norm2(&r).as_f64() / bnorm;
            history.push(rel);
            if rel < best.0 {
                best.0 = rel;
                best.1.copy_from_slice(&x);
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let mut tr = vec![T::zero(); n];
        self.op.residual(rhs, &x, &mut tr);
        let true_rel = norm2(&tr).as_f64() / bnorm;
        if true_rel <= tol {
            return Ok(SolveReport {
                solution: ScalarField::from_values(grid, x)?,
                iterations: it,
                relative_residual: true_rel,
                wall_time: start.elapsed().as_secs_f64(),
                history,
            });
        }
        Err(Error::NonConvergence {
            iterations: it,
            residual: true_rel.min(best.0),
            best: best.1.iter().map(|v| v.as_f64()).collect(),
        })
    }
}

/// One-shot solve with a multigrid preconditioner.
pub fn solve_spd<T: Real>(op: &SparseOperator<T>, rhs: &[T], tol: f64, max_iters: usize) -> Result<SolveReport<T>> {
    let opts = SolverOptions { tol, max_iters, ..SolverOptions::default() };
    Solver::new(Arc::new(op.clone()), opts)?.solve(rhs)
}
