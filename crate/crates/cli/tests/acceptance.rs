//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! naming its criterion, then asserts.

use std::process::Command;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use perfscale::calculus::assemble_laplacian;
use perfscale::corrector::{corrector_scaling_report, CellOptions};
use perfscale::geometry::{build_domain, BuildOptions, CellBoundary, DomainSpec, Grid, HoleShape, Host, Resolution, ShapeKind, Spacing};
use perfscale::linsolve::{dense_gradient, dense_matrix, dense_solve, smallest_eigenvalue_with, EigenOptions, Solver, SolverOptions};
use perfscale::norms::{duality_check, rescaling_check, DomainTag, NormProblem, Which};
use perfscale::scaling::{
    fit_scaling, run_sweep, verify_report, EtaLaw, FitModel, Method, Quantity, SweepHost, SweepResult, SweepSettings,
    SweepSpec,
};
use perfscale::Error;
use perfscale_cli::{parse_config, run_config_with, table_for, DEFAULT_CONFIG};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: String) {
    println!("{} criterion {n}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

fn ball() -> HoleShape<f64> {
    HoleShape::ball(0.25).unwrap()
}

fn spec(name: &str, quantities: Vec<Quantity>, d: usize, etas: &[f64], cells: f64) -> SweepSpec {
    let mut s = SweepSpec::new(name, quantities, d, etas.to_vec());
    s.cells_per_radius = cells;
    s
}

fn sweep(specs: &[SweepSpec]) -> SweepResult {
    run_sweep(specs, &SweepSettings::default()).unwrap()
}

/// `(η, value)` pairs of one quantity, at one `p` and `ε`, from one sweep.
fn series(result: &SweepResult, name: &str, q: Quantity, p: f64, eps: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.sweep == name && r.quantity == q && r.p == p && r.epsilon == eps)
        .map(|r| (r.eta, r.value.unwrap_or_else(|| panic!("{name} {q}: {:?}", r.error))))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    pts
}

fn exponent(pts: &[(f64, f64)]) -> f64 {
    fit_scaling(pts, FitModel::Power).unwrap().b
}

fn log_r2(pts: &[(f64, f64)]) -> (f64, f64) {
    let fit = fit_scaling(pts, FitModel::LogLaw).unwrap();
    (fit.r2, fit.b)
}

const DYADIC: [f64; 3] = [0.25, 0.125, 0.0625];

#[test]
fn criterion_01_spectral_identities() {
    let s = DomainSpec { d: 2, epsilon: 0.25, eta: 0.125, shape: ball(), host: Host::Bounded { side: 1.0 } };
    let solver = SolverOptions { tol: 1e-10, ..SolverOptions::default() };
    let eig = EigenOptions { tol: 1e-10, ..EigenOptions::default() };
    let problem = NormProblem::new(&s, 1.0 / 512.0, &BuildOptions::unchecked(), solver).unwrap();
    let dual = duality_check(&problem, &eig).unwrap();
    let a2 = problem.norm_p2(Which::A, &eig).unwrap().value;
    let pass = dual.relative_gap <= 1e-6 && (dual.energy_product - 1.0).abs() <= 1e-6 && (a2 - 1.0).abs() <= 1e-4;
    report(
        1,
        pass,
        format!("|B2-C2|/B2 = {:.2e}, B2^2 lambda_min - 1 = {:.2e}, A2 - 1 = {:.2e}", dual.relative_gap, dual.energy_product - 1.0, a2 - 1.0),
    );
}

#[test]
fn criterion_02_green_identity() {
    let mut worst = 0.0f64;
    let mut cells = 0;
    for (d, etas, per_radius) in [(2, vec![0.5, 0.25, 0.125, 0.0625], 4.0), (3, vec![0.5, 0.25, 0.125], 2.0)] {
        let mut opts = CellOptions::default();
        opts.build.resolution = Resolution { cells_per_radius: per_radius };
        let rows = corrector_scaling_report(&etas, &ball(), d, &[], Spacing::Dyadic, &opts).unwrap();
        for r in rows {
            worst = worst.max(r.green_defect);
            cells += 1;
        }
    }
    report(2, worst <= 1e-9, format!("largest Green defect {worst:.2e} over {cells} cells at tol 1e-10"));
}

#[test]
fn criterion_03_corrector_scalings() {
    let spatial = spec("spatial", vec![Quantity::CorrectorGrad, Quantity::CorrectorInt], 3, &DYADIC, 2.0);
    let planar = spec("planar", vec![Quantity::CorrectorInt], 2, &[0.25, 0.125, 0.0625, 0.03125], 4.0);
    let r = sweep(&[spatial, planar]);
    let grad = exponent(&series(&r, "spatial", Quantity::CorrectorGrad, 2.0, 1.0));
    let ints: Vec<f64> = series(&r, "spatial", Quantity::CorrectorInt, 2.0, 1.0).into_iter().map(|p| p.1).collect();
    let ratio = ints.iter().cloned().fold(0.0, f64::max) / ints.iter().cloned().fold(f64::INFINITY, f64::min);
    let (r2, slope) = log_r2(&series(&r, "planar", Quantity::CorrectorInt, 2.0, 1.0));
    let pass = (grad - 0.5).abs() <= 0.1 && ratio <= 3.0 && r2 >= 0.99 && slope > 0.0;
    report(3, pass, format!("d=3 grad exponent {grad:.3}, d=3 integral max/min {ratio:.3}, d=2 log-law R2 {r2:.4}"));
}

#[test]
fn criterion_04_poincare_scaling() {
    let spatial = spec("spatial", vec![Quantity::Poincare], 3, &DYADIC, 2.0);
    let planar = spec("planar", vec![Quantity::Poincare], 2, &[0.25, 0.125, 0.0625, 0.03125], 4.0);
    let r = sweep(&[spatial, planar]);
    let b = exponent(&series(&r, "spatial", Quantity::Poincare, 2.0, 1.0));
    let (r2, slope) = log_r2(&series(&r, "planar", Quantity::Poincare, 2.0, 1.0));
    report(4, (b + 1.0).abs() <= 0.15 && r2 >= 0.98 && slope > 0.0, format!("d=3 exponent {b:.3}, d=2 log-law R2 {r2:.4}"));
}

#[test]
fn criterion_05_06_lattice_d_and_c() {
    let spatial = spec("spatial", vec![Quantity::C, Quantity::D], 3, &DYADIC, 2.0);
    let planar = spec("planar", vec![Quantity::D], 2, &DYADIC, 4.0);
    let r = sweep(&[spatial, planar]);
    let d_exp = exponent(&series(&r, "spatial", Quantity::D, 2.0, 1.0));
    let (r2, slope) = log_r2(&series(&r, "planar", Quantity::D, 2.0, 1.0));
    let c_exp = exponent(&series(&r, "spatial", Quantity::C, 2.0, 1.0));
    println!("lattice C d=3 exponent {c_exp:.3}");
    report(5, (-1.15..=-0.85).contains(&d_exp) && r2 >= 0.98 && slope > 0.0, format!("d=3 D exponent {d_exp:.3}, d=2 log-law R2 {r2:.4}"));
    report(6, (-0.65..=-0.35).contains(&c_exp), format!("d=3 C exponent {c_exp:.3}"));
}

#[test]
fn criterion_07_epsilon_rescaling() {
    let s = DomainSpec { d: 2, epsilon: 0.5, eta: 0.125, shape: ball(), host: Host::Bounded { side: 1.0 } };
    let eig = EigenOptions { tol: 1e-10, ..EigenOptions::default() };
    let solver = SolverOptions { tol: 1e-10, ..SolverOptions::default() };
    let r = rescaling_check(&s, 1.0 / 128.0, 1.0 / 64.0, &BuildOptions::unchecked(), solver, &eig).unwrap();
    report(
        7,
        r.d_deviation <= 0.02 && r.c_deviation <= 0.02,
        format!("D ratio {:.5} (target 0.25), C ratio {:.5} (target 0.5)", r.d_ratio, r.c_ratio),
    );
}

#[test]
fn criterion_08_bounded_crossover() {
    let mut s = spec("bounded", vec![Quantity::D], 2, &[0.125], 2.0);
    s.host = SweepHost::Bounded;
    s.epsilons = vec![0.0625, 0.125, 1.0];
    let r = sweep(&[s]);
    let at = |eps| series(&r, "bounded", Quantity::D, 2.0, eps)[0].1;
    let small_hole = 0.125f64.powi(2) * (0.125f64 / 2.0).ln().abs();
    assert!(small_hole <= 0.1);
    let ratio = at(0.125) / at(0.0625);
    let plain = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
    let factor = at(1.0) / plain;
    let pass = (ratio / 4.0 - 1.0).abs() <= 0.15 && (1.0 / 3.0..=3.0).contains(&factor);
    report(8, pass, format!("D(1/8)/D(1/16) = {ratio:.3}, D(eps=1) = {:.5} = {factor:.3} x unperforated", at(1.0)));
}

#[test]
fn criterion_09_lower_bounds() {
    let mut cutoff = spec("cutoff", vec![Quantity::B, Quantity::D], 3, &DYADIC, 2.0);
    cutoff.method = Method::CorrectorCutoff;
    cutoff.p = vec![4.0];
    let exact = spec("exact", vec![Quantity::A, Quantity::B, Quantity::C, Quantity::D], 2, &DYADIC, 2.0);
    let mut cut2 = spec("cut2", vec![Quantity::B, Quantity::C, Quantity::D], 2, &DYADIC, 2.0);
    cut2.method = Method::CorrectorCutoff;
    let mut search2 = spec("search2", vec![Quantity::A, Quantity::B, Quantity::C, Quantity::D], 2, &DYADIC, 2.0);
    search2.method = Method::RandomSearch;
    search2.trials = 8;
    let r = sweep(&[cutoff, exact, cut2, search2]);

    let d4 = exponent(&series(&r, "cutoff", Quantity::D, 4.0, 1.0));
    let b4 = exponent(&series(&r, "cutoff", Quantity::B, 4.0, 1.0));
    let mut worst = f64::NEG_INFINITY;
    let mut compared = 0;
    for q in [Quantity::A, Quantity::B, Quantity::C, Quantity::D] {
        let truth = series(&r, "exact", q, 2.0, 1.0);
        for name in ["cut2", "search2"] {
            for (eta, v) in series(&r, name, q, 2.0, 1.0) {
                let (_, t) = truth.iter().find(|p| p.0 == eta).unwrap();
                worst = worst.max(v / t - 1.0);
                compared += 1;
            }
        }
    }
    let pass = d4 <= -0.8 && b4 <= -1.0 && worst <= 1e-6;
    report(
        9,
        pass,
        format!("d=3 p=4 D lower exponent {d4:.3}, B lower exponent {b4:.3}, largest lower/exact - 1 = {worst:.2e} over {compared} p=2 bounds"),
    );
}

fn small_grid(d: usize, k: usize, eps_div: u32, eta: f64, shape: ShapeKind<f64>, host: Host<f64>) -> Option<Arc<Grid>> {
    let epsilon = 1.0 / f64::from(eps_div);
    let side = if matches!(host, Host::UnitCell { .. }) { epsilon } else { 1.0 };
    let s = DomainSpec { d, epsilon, eta, shape: HoleShape::new(shape).ok()?, host };
    let g = build_domain(&s, side / k as f64, &BuildOptions::unchecked()).ok()?;
    (g.fluid_count() > 0 && g.fluid_count() <= 400).then(|| Arc::new(g))
}

fn generalized_top(a: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let li = a.clone().cholesky().unwrap().l().try_inverse().unwrap();
    let s = &li * m * li.transpose();
    SymmetricEigen::new((&s + s.transpose()) * 0.5).eigenvalues.max()
}

/// Largest relative deviation from the dense oracle on one grid, or `None`
/// when the drawn geometry is degenerate.
fn oracle_deviation(g: &Arc<Grid>, seed: u64) -> Option<f64> {
    let op = match assemble_laplacian(g) {
        Err(Error::Singular(_)) => return None,
        other => Arc::new(other.unwrap()),
    };
    let n = op.dim();
    let dense = dense_matrix(&op).unwrap();
    let eig = EigenOptions { tol: 1e-13, max_iters: 2000, ..EigenOptions::default() };
    let solver = Solver::new(op.clone(), SolverOptions { tol: 1e-13, max_iters: 5000, ..SolverOptions::default() }).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let x = DVector::from_vec(solver.solve(&b).unwrap().solution.into_values());
    let x_ref = DVector::from_vec(dense_solve(&op, &b).unwrap());
    let mut worst = (&x - &x_ref).norm() / x_ref.norm();

    let lmin = SymmetricEigen::new(dense.clone()).eigenvalues.min();
    worst = worst.max(rel(smallest_eigenvalue_with(&solver, &eig).unwrap().value, lmin));

    let problem = NormProblem::from_solver(solver, DomainTag::Other);
    let (grad, _) = dense_gradient(g).unwrap();
    let gtg = grad.transpose() * &grad;
    let b2 = generalized_top(&(&dense * &dense), &gtg).sqrt();
    for (w, reference) in [(Which::D, 1.0 / lmin), (Which::B, b2), (Which::C, b2), (Which::A, generalized_top(&dense, &gtg))] {
        worst = worst.max(rel(problem.norm_p2(w, &eig).unwrap().value, reference));
    }
    Some(worst)
}

#[test]
fn criterion_10_oracle_equivalence() {
    let shape = prop_oneof![
        (0.1..0.45f64).prop_map(|radius| ShapeKind::Ball { radius }),
        (0.1..0.4f64).prop_map(|half_width| ShapeKind::Cube { half_width }),
        (0.1..0.45f64, 0.1..0.45f64, 0.1..0.45f64).prop_map(|(a, b, c)| ShapeKind::Ellipsoid { semi_axes: [a, b, c] }),
    ];
    let host = prop_oneof![
        Just(Host::Bounded { side: 1.0 }),
        Just(Host::UnitCell { boundary: CellBoundary::Periodic }),
        Just(Host::UnitCell { boundary: CellBoundary::Dirichlet }),
        Just(Host::UnitCell { boundary: CellBoundary::Neumann }),
    ];
    let strategy = (2usize..=3, 4usize..=12, 1u32..=3, 0.3..1.0f64, shape, host, any::<u64>());
    let mut runner = TestRunner::new(RunnerConfig { cases: 200, failure_persistence: None, ..RunnerConfig::default() });
    let worst = std::cell::Cell::new(0.0f64);
    let outcome = runner.run(&strategy, |(d, k, eps_div, eta, shape, host, seed)| {
        let k = if d == 3 { k.min(7) } else { k * 2 };
        let g = small_grid(d, k, eps_div, eta, shape, host);
        prop_assume!(g.is_some());
        let dev = oracle_deviation(&g.unwrap(), seed);
        prop_assume!(dev.is_some());
        let dev = dev.unwrap();
        worst.set(worst.get().max(dev));
        prop_assert!(dev <= 1e-8, "deviation {dev}");
        Ok(())
    });
    report(10, outcome.is_ok(), format!("largest relative deviation {:.2e} over 200 cases; {outcome:?}", worst.get()));
}

fn verify(out: &std::path::Path) -> (Option<i32>, Vec<u8>) {
    let o = Command::new(env!("CARGO_BIN_EXE_perfscale"))
        .args(["verify", "--out"])
        .arg(out)
        .env_remove("PERFSCALE_WORKERS")
        .output()
        .unwrap();
    (o.status.code(), o.stdout)
}

#[test]
fn criterion_11_determinism_and_exit_codes() {
    let base = std::env::temp_dir().join(format!("perfscale-acceptance-{}", std::process::id()));
    let (a, b) = (base.join("a"), base.join("b"));
    let (code_a, out_a) = verify(&a);
    let (code_b, out_b) = verify(&b);
    let read = |dir: &std::path::Path, f: &str| std::fs::read(dir.join(f)).unwrap();
    let same = out_a == out_b
        && read(&a, "report.csv") == read(&b, "report.csv")
        && read(&a, "report.json") == read(&b, "report.json");

    let cfg = parse_config(DEFAULT_CONFIG).unwrap();
    let mut table = table_for(&cfg.sweeps);
    for e in table.entries.iter_mut().filter(|e| e.id == "lattice-D" && e.d == 2) {
        e.eta_law = EtaLaw::power(3.into());
    }
    let corrupted = verify_report(&run_config_with(&cfg, 1, &table).unwrap()).exit_code;
    let _ = std::fs::remove_dir_all(&base);
    report(
        11,
        code_a == Some(0) && code_b == Some(0) && same && corrupted == 1,
        format!("exit codes {code_a:?}/{code_b:?}, byte-identical runs {same}, corrupted table exit {corrupted}"),
    );
}
