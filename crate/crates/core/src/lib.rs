//! Numerical laboratory for the Dirichlet problem `-Δu = F + div f` on
//! periodically perforated domains.
//!
//! Domains are structured grids with holes `ε(k + ηT)` removed; the crate
//! assembles the discrete Laplacian on the fluid nodes, solves with
//! multigrid-preconditioned conjugate gradients, measures the solution
//! operator norms and fits their scaling in `η` and `ε`.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the scalar. Sweeps, fits and reports work in `f64`.

pub mod calculus;
pub mod corrector;
pub mod error;
pub mod geometry;
pub mod linsolve;
pub mod norms;
pub mod scalar;
pub mod scaling;
pub mod vtk;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid64 = geometry::Grid<f64>;
pub type Grid32 = geometry::Grid<f32>;
pub type ScalarField64 = calculus::ScalarField<f64>;
pub type ScalarField32 = calculus::ScalarField<f32>;
pub type VectorField64 = calculus::VectorField<f64>;
pub type VectorField32 = calculus::VectorField<f32>;
pub type SparseOperator64 = calculus::SparseOperator<f64>;
pub type SparseOperator32 = calculus::SparseOperator<f32>;
pub type Solver64 = linsolve::Solver<f64>;
pub type Solver32 = linsolve::Solver<f32>;
pub type CorrectorResult64 = corrector::CorrectorResult<f64>;
pub type CorrectorResult32 = corrector::CorrectorResult<f32>;
pub type HoleShape64 = geometry::HoleShape<f64>;
pub type DomainSpec64 = geometry::DomainSpec<f64>;
