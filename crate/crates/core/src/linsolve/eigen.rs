use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cg::{Solver, SolverOptions};
use crate::calculus::SparseOperator;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Relative change between successive estimates at which to stop.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Rayleigh-Ritz acceleration over the last two search directions.
    pub accelerate: bool,
    /// Relative tolerance of the inner solves in accelerated mode.
    pub inner_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 500, seed: 0x5eed, accelerate: true, inner_tol: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEstimate<T = f64> {
    pub value: f64,
    pub iterations: usize,
    /// Observed contraction of successive changes, a proxy for the spectral
    /// gap ratio; `NaN` until two changes are available.
    pub gap: f64,
    /// Unit-norm eigenvector estimate.
    pub vector: Vec<T>,
    /// Inner linear solves performed.
    pub solves: usize,
}

pub(crate) fn random_unit<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
    let s = T::one() / norm2(&x);
    x.iter_mut().for_each(|v| *v *= s);
    x
}

/// Tracks successive relative changes and decides convergence, allowing
/// for slow geometric convergence: the remaining error after a change
/// `c` with contraction `q` is about `c q / (1 - q)`.
#[derive(Debug, Default)]
struct Stopper {
    prev: Option<f64>,
    last_change: Option<f64>,
    ratio: f64,
}

impl Stopper {
    fn push(&mut self, value: f64, tol: f64) -> bool {
        let Some(prev) = self.prev.replace(value) else {
            self.ratio = f64::NAN;
            return false;
        };
        let change = (value - prev).abs() / value.abs().max(f64::MIN_POSITIVE);
        if let Some(last) = self.last_change.replace(change) {
            if last > 0.0 {
                self.ratio = (change / last).min(0.999);
            }
        }
        let q = if self.ratio.is_finite() { self.ratio } else { 0.5 };
        change <= tol && change * q / (1.0 - q) <= tol
    }
}

/// Largest eigenvalue of a self-adjoint positive semidefinite operator given
/// as a callback `apply(x, y)` computing `y = Op x`.
pub fn power_iteration<T: Real>(
    n: usize,
    mut apply: impl FnMut(&[T], &mut [T]) -> Result<()>,
    opts: &EigenOptions,
) -> Result<SpectralEstimate<T>> {
    if n == 0 {
        return Err(Error::Config("power iteration on an empty space".into()));
    }
    if opts.accelerate && n > 2 {
        return lanczos(n, apply, opts);
    }
    let mut x = random_unit::<T>(n, opts.seed);
    let mut y = vec![T::zero(); n];
    let mut stop = Stopper::default();
    let mut value = 0.0;
    for it in 1..=opts.max_iters {
        apply(&x, &mut y)?;
        value = dot(&x, &y).as_f64();
        let ny = norm2(&y);
        if ny == T::zero() {
            return Ok(SpectralEstimate { value: 0.0, iterations: it, gap: 0.0, vector: x, solves: it });
        }
        let converged = stop.push(value, opts.tol);
        let s = T::one() / ny;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = *yi * s;
        }
        if converged {
            return Ok(SpectralEstimate { value, iterations: it, gap: stop.ratio, vector: x, solves: it });
        }
    }
    Err(Error::EigenNonConvergence { iterations: opts.max_iters, estimate: value, gap: stop.ratio })
}

/// Krylov vectors kept before restarting from the current Ritz vector.
const LANCZOS_BASIS: usize = 40;

/// Lanczos with full reorthogonalization and restarts; converges like power
/// iteration on the square root of the gap ratio.
fn lanczos<T: Real>(
    n: usize,
    mut apply: impl FnMut(&[T], &mut [T]) -> Result<()>,
    opts: &EigenOptions,
) -> Result<SpectralEstimate<T>> {
    let mut start = random_unit::<T>(n, opts.seed);
    let mut stop = Stopper::default();
    let mut theta = 0.0;
    let mut applies = 0;
    let mut w = vec![T::zero(); n];
    while applies < opts.max_iters {
        let mut basis: Vec<Vec<T>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let k = basis.len() - 1;
            apply(&basis[k], &mut w)?;
            applies += 1;
            let a = dot(&basis[k], &w);
            alpha.push(a.as_f64());
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * *vi);
                }
            }
            let b = norm2(&w).as_f64();
            let m = alpha.len();
            let mut t = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (imax, &top) =
                eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
            theta = top;
            let s = eig.eigenvectors.column(imax).into_owned();
            let residual = (b * s[m - 1]).abs();
            let converged = stop.push(theta, opts.tol);
            let exhausted = b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE);
            let done = exhausted || (converged && residual <= opts.tol.sqrt() * theta.abs());
            if done || m == LANCZOS_BASIS || applies >= opts.max_iters {
                let mut x = vec![T::zero(); n];
                for (v, &c) in basis.iter().zip(s.iter()) {
                    let c = T::lit(c);
                    x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * *vi);
                }
                let nx = T::one() / norm2(&x);
                x.iter_mut().for_each(|v| *v *= nx);
                if done {
                    return Ok(SpectralEstimate { value: theta, iterations: applies, gap: stop.ratio, vector: x, solves: applies });
                }
                start = x;
                break;
            }
            beta.push(b);
            let inv = T::one() / T::lit(b);
            basis.push(w.iter().map(|&v| v * inv).collect());
        }
    }
    Err(Error::EigenNonConvergence { iterations: applies, estimate: theta, gap: stop.ratio })
}

/// Smallest eigenvalue of an SPD operator.
pub fn smallest_eigenvalue<T: Real>(op: &SparseOperator<T>, tol: f64) -> Result<SpectralEstimate<T>> {
    let solver = Solver::new(Arc::new(op.clone()), SolverOptions { tol: 1e-10, ..SolverOptions::default() })?;
    smallest_eigenvalue_with(&solver, &EigenOptions { tol, ..EigenOptions::default() })
}

/// Smallest eigenvalue by inverse iteration; each step performs one solve
/// with `solver`. With `accelerate` the step is followed by a Rayleigh-Ritz
/// projection onto the current iterate, the new search direction and the
/// previous step.
pub fn smallest_eigenvalue_with<T: Real>(solver: &Solver<T>, opts: &EigenOptions) -> Result<SpectralEstimate<T>> {
    let n = solver.operator().dim();
    if n == 0 {
        return Err(Error::EmptyFluid);
    }
    if opts.accelerate {
        accelerated(solver, opts)
    } else {
        inverse_iteration(solver, opts)
    }
}

fn inverse_iteration<T: Real>(solver: &Solver<T>, opts: &EigenOptions) -> Result<SpectralEstimate<T>> {
    let n = solver.operator().dim();
    let mut x = random_unit::<T>(n, opts.seed);
    let mut stop = Stopper::default();
    let inner = (opts.tol * 0.1).max(1e-14);
    let max_inner = solver.options().max_iters;
    let mut value = f64::NAN;
    for it in 1..=opts.max_iters {
        let y = solver.solve_with(&x, None, inner, max_inner)?.solution.into_values();
        let nu = dot(&x, &y).as_f64();
        value = 1.0 / nu;
        let converged = stop.push(value, opts.tol);
        let s = T::one() / norm2(&y);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = *yi * s;
        }
        if converged {
            return Ok(SpectralEstimate { value, iterations: it, gap: stop.ratio, vector: x, solves: it });
        }
    }
    Err(Error::EigenNonConvergence { iterations: opts.max_iters, estimate: value, gap: stop.ratio })
}

fn scale_pair<T: Real>(v: &mut [T], av: &mut [T]) -> bool {
    let nv = norm2(v);
    if !(nv > T::zero()) {
        return false;
    }
    let s = T::one() / nv;
    v.iter_mut().for_each(|x| *x *= s);
    av.iter_mut().for_each(|x| *x *= s);
    true
}

/// Smallest Ritz pair of the pencil `(K, S)`; `None` when `S` is not
/// numerically positive definite.
fn ritz(k: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<(f64, Vec<f64>)> {
    let chol = s.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let m = &linv * k * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let (imin, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let y = eig.eigenvectors.column(imin).into_owned();
    let c = linv.transpose() * y;
    // reject badly conditioned bases
    let cond = s.diagonal().max() / chol.l().diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    if !cond.is_finite() || cond > 1e12 {
        return None;
    }
    Some((lam, c.iter().copied().collect()))
}

fn accelerated<T: Real>(solver: &Solver<T>, opts: &EigenOptions) -> Result<SpectralEstimate<T>> {
    let op = solver.operator().clone();
    let n = op.dim();
    let max_inner = solver.options().max_iters;
    let mut x = random_unit::<T>(n, opts.seed);
    let mut ax = op.apply_vec(&x);
    let mut lambda = dot(&x, &ax).as_f64();
    if n == 1 {
        return Ok(SpectralEstimate { value: lambda, iterations: 0, gap: 0.0, vector: x, solves: 0 });
    }
    let mut p: Option<(Vec<T>, Vec<T>)> = None;
    let mut stop = Stopper::default();
    stop.push(lambda, opts.tol);
    let mut solves = 0;
    let res_tol = 0.1 * opts.tol.sqrt();
    let mut r = vec![T::zero(); n];
    for it in 1..=opts.max_iters {
        let lam_t = T::lit(lambda);
        for i in 0..n {
            r[i] = ax[i] - lam_t * x[i];
        }
        let res = norm2(&r).as_f64() / lambda.abs();
        if res == 0.0 {
            return Ok(SpectralEstimate { value: lambda, iterations: it, gap: 0.0, vector: x, solves });
        }
        let mut w = match solver.solve_with(&r, None, opts.inner_tol, max_inner) {
            Ok(rep) => rep.solution.into_values(),
            Err(Error::NonConvergence { best, .. }) => best.into_iter().map(T::lit).collect(),
            Err(e) => return Err(e),
        };
        solves += 1;
        // remove the component along x to keep the basis well conditioned
        let c = dot(&x, &w);
        w.iter_mut().zip(&x).for_each(|(wi, xi)| *wi -= c * *xi);
        let mut aw = op.apply_vec(&w);
        if !scale_pair(&mut w, &mut aw) {
            return Ok(SpectralEstimate { value: lambda, iterations: it, gap: 0.0, vector: x, solves });
        }
        let mut basis: Vec<(&[T], &[T])> = vec![(&x, &ax), (&w, &aw)];
        if let Some((pv, apv)) = &p {
            basis.push((pv, apv));
        }
        let (coef, m) = loop {
            let m = basis.len();
            let mut s = DMatrix::zeros(m, m);
            let mut k = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let sij = dot(basis[i].0, basis[j].0).as_f64();
                    let kij = 0.5 * (dot(basis[i].0, basis[j].1).as_f64() + dot(basis[j].0, basis[i].1).as_f64());
                    s[(i, j)] = sij;
                    s[(j, i)] = sij;
                    k[(i, j)] = kij;
                    k[(j, i)] = kij;
                }
            }
            match ritz(&k, &s) {
                Some((_, c)) => break (c, m),
                None if m == 3 => {
                    basis.pop();
                }
                None => return Err(Error::Singular("degenerate Rayleigh-Ritz basis".into())),
            }
        };
        let ct: Vec<T> = coef.iter().map(|&c| T::lit(c)).collect();
        let mut pn = vec![T::zero(); n];
        let mut apn = vec![T::zero(); n];
        for j in 1..m {
            let (v, av) = basis[j];
            for i in 0..n {
                pn[i] += ct[j] * v[i];
                apn[i] += ct[j] * av[i];
            }
        }
        for i in 0..n {
            x[i] = ct[0] * x[i] + pn[i];
            ax[i] = ct[0] * ax[i] + apn[i];
        }
        scale_pair(&mut x, &mut ax);
        p = if scale_pair(&mut pn, &mut apn) { Some((pn, apn)) } else { None };
        lambda = dot(&x, &ax).as_f64();
        let changed = stop.push(lambda, opts.tol);
        if changed && res <= res_tol {
            return Ok(SpectralEstimate { value: lambda, iterations: it, gap: stop.ratio, vector: x, solves });
        }
    }
    Err(Error::EigenNonConvergence { iterations: opts.max_iters, estimate: lambda, gap: stop.ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::assemble_laplacian;
    use crate::geometry::{build_plain_box, BuildOptions};

    #[test]
    fn diagonal_operator() {
        let est = power_iteration::<f64>(
            2,
            |x, y| {
                y[0] = 2.0 * x[0];
                y[1] = x[1];
                Ok(())
            },
            &EigenOptions { tol: 1e-12, ..Default::default() },
        )
        .unwrap();
        assert!((est.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn projection_has_unit_norm() {
        // projection onto span{(1,1,0)}
        let est = power_iteration::<f64>(
            3,
            |x, y| {
                let m = 0.5 * (x[0] + x[1]);
                y[0] = m;
                y[1] = m;
                y[2] = 0.0;
                Ok(())
            },
            &EigenOptions::default(),
        )
        .unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let r = power_iteration::<f64>(
            2,
            |x, y| {
                y[0] = x[0];
                y[1] = 0.999999 * x[1];
                Ok(())
            },
            &EigenOptions { max_iters: 3, tol: 1e-15, ..Default::default() },
        );
        assert!(matches!(r, Err(Error::EigenNonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn dirichlet_square_both_modes() {
        let h = 1.0 / 32.0;
        let g = Arc::new(build_plain_box(2, 1.0, h, &BuildOptions::unchecked()).unwrap());
        let a = assemble_laplacian(&g).unwrap();
        let exact = 8.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let solver = Solver::new(Arc::new(a), SolverOptions { tol: 1e-12, ..Default::default() }).unwrap();
        for accelerate in [false, true] {
            let est = smallest_eigenvalue_with(&solver, &EigenOptions { accelerate, ..Default::default() }).unwrap();
            assert!((est.value - exact).abs() <= 1e-9 * exact, "{accelerate}: {} vs {exact}", est.value);
        }
    }
}
