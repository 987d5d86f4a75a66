//! Sparse solver, eigensolvers and norm estimates against dense linear algebra.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use perfscale::calculus::assemble_laplacian;
use perfscale::geometry::{build_domain, BuildOptions, CellBoundary, DomainSpec, Grid, HoleShape, Host, ShapeKind};
use perfscale::linsolve::{
    dense_gradient, dense_matrix, dense_solve, power_iteration, smallest_eigenvalue_with, EigenOptions, Solver,
    SolverOptions, DENSE_CAP,
};
use perfscale::norms::{DomainTag, NormProblem, Which};
use perfscale::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REL: f64 = 1e-8;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn shape_strategy() -> impl Strategy<Value = ShapeKind<f64>> {
    prop_oneof![
        (0.1..0.45f64).prop_map(|radius| ShapeKind::Ball { radius }),
        (0.1..0.4f64).prop_map(|half_width| ShapeKind::Cube { half_width }),
        (0.1..0.45f64, 0.1..0.45f64, 0.1..0.45f64).prop_map(|(a, b, c)| ShapeKind::Ellipsoid { semi_axes: [a, b, c] }),
    ]
}

fn host_strategy() -> impl Strategy<Value = Host<f64>> {
    prop_oneof![
        Just(Host::Bounded { side: 1.0 }),
        Just(Host::UnitCell { boundary: CellBoundary::Periodic }),
        Just(Host::UnitCell { boundary: CellBoundary::Dirichlet }),
        Just(Host::UnitCell { boundary: CellBoundary::Neumann }),
    ]
}

/// A perforated grid small enough for the dense oracle, or `None` when the
/// drawn geometry leaves the operator singular or empty.
fn small_grid(d: usize, k: usize, eps_div: u32, eta: f64, shape: ShapeKind<f64>, host: Host<f64>) -> Option<Arc<Grid>> {
    let epsilon = 1.0 / f64::from(eps_div);
    let side = match host {
        Host::UnitCell { .. } => epsilon,
        _ => 1.0,
    };
    let h = side / k as f64;
    let spec = DomainSpec { d, epsilon, eta, shape: HoleShape::new(shape).ok()?, host };
    let g = build_domain(&spec, h, &BuildOptions::unchecked()).ok()?;
    (g.fluid_count() > 0 && g.fluid_count() <= 400).then(|| Arc::new(g))
}

fn tight() -> SolverOptions {
    SolverOptions { tol: 1e-13, max_iters: 5000, ..SolverOptions::default() }
}

fn eig() -> EigenOptions {
    EigenOptions { tol: 1e-13, max_iters: 2000, ..EigenOptions::default() }
}

/// Largest eigenvalue of `L^{-1} M L^{-T}` where `A = L L^T`.
fn generalized_top(a: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let l = a.clone().cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let s = &li * m * li.transpose();
    let s = (&s + s.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.max()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn sparse_matches_dense(
        d in 2usize..=3,
        k in 4usize..=12,
        eps_div in 1u32..=3,
        eta in 0.3..1.0f64,
        shape in shape_strategy(),
        host in host_strategy(),
        seed in any::<u64>(),
    ) {
        let k = if d == 3 { k.min(7) } else { k * 2 };
        let grid = small_grid(d, k, eps_div, eta, shape, host);
        prop_assume!(grid.is_some());
        let grid = grid.unwrap();
        let op = assemble_laplacian(&grid);
        prop_assume!(!matches!(op, Err(Error::Singular(_))));
        let op = Arc::new(op.unwrap());
        let n = op.dim();
        prop_assert!(n <= DENSE_CAP);
        let dense = dense_matrix(&op).unwrap();

        // conjugate gradients
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let solver = Solver::new(op.clone(), tight()).unwrap();
        let x = solver.solve(&b).unwrap().solution.into_values();
        let x_ref = dense_solve(&op, &b).unwrap();
        let err = DVector::from_vec(x.clone()) - DVector::from_vec(x_ref.clone());
        prop_assert!(err.norm() <= REL * DVector::from_vec(x_ref).norm(), "cg error {}", err.norm());

        // smallest eigenvalue
        let spectrum = SymmetricEigen::new(dense.clone()).eigenvalues;
        let lmin = spectrum.min();
        let est = smallest_eigenvalue_with(&solver, &eig()).unwrap();
        prop_assert!(rel(est.value, lmin) <= REL, "lambda_min {} vs {}", est.value, lmin);

        // p = 2 norms through power iteration
        let problem = NormProblem::from_solver(solver, DomainTag::Other);
        let (g, _) = dense_gradient(&grid).unwrap();
        let gtg = g.transpose() * &g;
        let b2 = generalized_top(&(&dense * &dense), &gtg).sqrt();
        let expect = [
            (Which::D, 1.0 / lmin),
            (Which::B, b2),
            (Which::C, b2),
            (Which::A, generalized_top(&dense, &gtg)),
        ];
        for (which, reference) in expect {
            let v = problem.norm_p2(which, &eig()).unwrap().value;
            prop_assert!(rel(v, reference) <= REL, "{which}: {v} vs {reference}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn power_iteration_matches_dense_on_random_matrices(seed in any::<u64>(), accelerate in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = DMatrix::<f64>::from_fn(50, 50, |_, _| rng.random::<f64>() - 0.5);
        let m = q.transpose() * &q;
        let top = SymmetricEigen::new(m.clone()).eigenvalues.max();
        let opts = EigenOptions { tol: 1e-14, max_iters: 20_000, accelerate, seed, ..EigenOptions::default() };
        let est = power_iteration::<f64>(50, |x, y| {
            let v = &m * DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
            Ok(())
        }, &opts).unwrap();
        prop_assert!(rel(est.value, top) <= REL, "{} vs {}", est.value, top);
    }
}

#[test]
fn oracle_refuses_large_operators() {
    let g = Arc::new(perfscale::geometry::build_plain_box(2, 1.0, 1.0 / 80.0, &BuildOptions::unchecked()).unwrap());
    let op = assemble_laplacian(&g).unwrap();
    assert!(op.dim() > DENSE_CAP);
    assert!(matches!(dense_matrix(&op), Err(Error::DenseCap { .. })));
}

#[test]
fn large_grid_matches_dense() {
    let shape = HoleShape::ball(0.3).unwrap();
    let spec = DomainSpec { d: 2, epsilon: 0.25, eta: 0.5, shape, host: Host::Bounded { side: 1.0 } };
    let grid = Arc::new(build_domain(&spec, 1.0 / 48.0, &BuildOptions::unchecked()).unwrap());
    let op = Arc::new(assemble_laplacian(&grid).unwrap());
    assert!(op.dim() > 2000 && op.dim() <= DENSE_CAP, "{}", op.dim());
    let b: Vec<f64> = (0..op.dim()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    let solver = Solver::new(op.clone(), tight()).unwrap();
    let x = DVector::from_vec(solver.solve(&b).unwrap().solution.into_values());
    let x_ref = DVector::from_vec(dense_solve(&op, &b).unwrap());
    assert!((&x - &x_ref).norm() <= REL * x_ref.norm());
    let lmin = SymmetricEigen::new(dense_matrix(&op).unwrap()).eigenvalues.min();
    let est = smallest_eigenvalue_with(&solver, &eig()).unwrap();
    assert!(rel(est.value, lmin) <= REL, "{} vs {lmin}", est.value);
}
