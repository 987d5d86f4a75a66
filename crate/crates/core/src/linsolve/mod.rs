//! Linear solves and extreme eigenvalues for the assembled Laplacian.

mod cg;
pub mod dense;
mod eigen;
mod multigrid;

pub use cg::{solve_spd, Preconditioner, SolveReport, Solver, SolverOptions};
pub use dense::{dense_gradient, dense_matrix, dense_solve, dense_spectrum, symmetric_eigenvalues, DENSE_CAP};
pub use eigen::{power_iteration, smallest_eigenvalue, smallest_eigenvalue_with, EigenOptions, SpectralEstimate};
pub use multigrid::{Multigrid, MultigridOptions, COARSE_DIRECT_MAX};
