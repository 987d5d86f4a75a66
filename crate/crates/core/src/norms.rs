//! The four solution-operator norms of the zero-Dirichlet problem
//! `-Δu = F + div f`:
//!
//! | norm | datum | measured |
//! |------|-------|----------|
//! | `A`  | `f`   | `∇u`     |
//! | `B`  | `F`   | `∇u`     |
//! | `C`  | `f`   | `u`      |
//! | `D`  | `F`   | `u`      |
//!
//! At `p = 2` they are computed from spectral identities; at other `p` any
//! trial datum gives a certified lower bound.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calculus::{assemble_laplacian, divergence_adjoint, gradient, ScalarField, VectorField};
use crate::corrector::{CellOptions, CellProblem, CorrectorResult};
use crate::error::{Error, Result};
use crate::geometry::{build_domain, BuildOptions, CellBoundary, DomainSpec, Grid, HoleShape, Host};
use crate::linsolve::{power_iteration, smallest_eigenvalue_with, EigenOptions, Solver, SolverOptions};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Which {
    A,
    B,
    C,
    D,
}

impl Which {
    pub const ALL: [Which; 4] = [Which::A, Which::B, Which::C, Which::D];

    /// Power of `ε` in `N(ε, η) = ε^k N(1, η)`.
    pub fn epsilon_power(self) -> i32 {
        match self {
            Which::A => 0,
            Which::B | Which::C => 1,
            Which::D => 2,
        }
    }

    pub fn vector_datum(self) -> bool {
        matches!(self, Which::A | Which::C)
    }

    pub fn measures_gradient(self) -> bool {
        matches!(self, Which::A | Which::B)
    }
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Which::A),
            "B" | "b" => Ok(Which::B),
            "C" | "c" => Ok(Which::C),
            "D" | "d" => Ok(Which::D),
            other => Err(Error::Config(format!("unknown operator norm {other:?}, expected A, B, C or D"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    ExactP2,
    LowerBound,
    RandomSearchLowerBound,
}

/// Where a measurement was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainTag {
    /// Full lattice, through its periodic cell.
    Lattice,
    TruncatedLattice,
    Bounded,
    Cell,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormEstimate {
    pub which: Which,
    pub p: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub value: f64,
    pub kind: EstimateKind,
    pub grid_h: f64,
    pub iterations: usize,
    pub domain: DomainTag,
}

fn tag_of<T>(spec: &DomainSpec<T>) -> DomainTag {
    match spec.host {
        Host::UnitCell { boundary: CellBoundary::Periodic } => DomainTag::Lattice,
        Host::UnitCell { .. } => DomainTag::Cell,
        Host::TruncatedLattice { .. } => DomainTag::TruncatedLattice,
        Host::Bounded { .. } => DomainTag::Bounded,
    }
}

/// A grid with its Laplacian and solver, ready for norm measurements.
pub struct NormProblem<T = f64> {
    solver: Solver<T>,
    domain: DomainTag,
}

impl<T: Real> NormProblem<T> {
    pub fn new(spec: &DomainSpec<T>, h: T, build: &BuildOptions, solver: SolverOptions) -> Result<Self> {
        let grid = Arc::new(build_domain(spec, h, build)?);
        Self::from_grid(grid, tag_of(spec), solver)
    }

    pub fn from_grid(grid: Arc<Grid<T>>, domain: DomainTag, opts: SolverOptions) -> Result<Self> {
        let op = Arc::new(assemble_laplacian(&grid)?);
        Ok(Self { solver: Solver::new(op, opts)?, domain })
    }

    pub fn from_solver(solver: Solver<T>, domain: DomainTag) -> Self {
        Self { solver, domain }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.solver.operator().grid()
    }

    pub fn solver(&self) -> &Solver<T> {
        &self.solver
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    fn row(&self, which: Which, p: f64, value: f64, kind: EstimateKind, iterations: usize) -> OperatorNormEstimate {
        let g = self.grid();
        OperatorNormEstimate {
            which,
            p,
            epsilon: g.info().epsilon,
            eta: g.info().eta,
            value,
            kind,
            grid_h: g.spacing().as_f64(),
            iterations,
            domain: self.domain,
        }
    }

    fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        Ok(self.solver.solve(rhs)?.solution.into_values())
    }

    fn edge_field(&self, x: &[T]) -> Result<VectorField<T>> {
        let n = self.grid().node_count();
        let comps = x.chunks(n).map(<[T]>::to_vec).collect();
        VectorField::from_components(self.grid().clone(), comps)
    }

    fn flatten(f: &VectorField<T>, y: &mut [T]) {
        for (dst, src) in y.chunks_mut(f.grid().node_count()).zip(f.components()) {
            dst.copy_from_slice(src);
        }
    }

    fn scalar(&self, v: Vec<T>) -> Result<ScalarField<T>> {
        ScalarField::from_values(self.grid().clone(), v)
    }

    /// `N_2` for the chosen operator. Each norm uses its own composed
    /// operator: `D` through inverse iteration, `A`, `B`, `C` through power
    /// iteration on `Q Q^*` for the respective solution map `Q`.
    pub fn norm_p2(&self, which: Which, eig: &EigenOptions) -> Result<OperatorNormEstimate> {
        let grid = self.grid().clone();
        let edges = grid.dim() * grid.node_count();
        let nf = grid.fluid_count();
        let (value, iterations) = match which {
            Which::D => {
                let e = smallest_eigenvalue_with(&self.solver, eig)?;
                (1.0 / e.value, e.iterations)
            }
            Which::A => {
                // g -> ∇ A^{-1} (-div g), a projection onto discrete gradients
                let e = power_iteration(
                    edges,
                    |x, y| {
                        let g = self.edge_field(x)?;
                        let mut b = divergence_adjoint(&g).into_values();
                        b.iter_mut().for_each(|v| *v = -*v);
                        let u = self.scalar(self.solve(&b)?)?;
                        Self::flatten(&gradient(&u), y);
                        Ok(())
                    },
                    eig,
                )?;
                (e.value.max(0.0), e.iterations)
            }
            Which::B => {
                // B B^* = ∇ A^{-2} (-div) on edge fields
                let e = power_iteration(
                    edges,
                    |x, y| {
                        let g = self.edge_field(x)?;
                        let mut b = divergence_adjoint(&g).into_values();
                        b.iter_mut().for_each(|v| *v = -*v);
                        let w = self.solve(&b)?;
                        let u = self.scalar(self.solve(&w)?)?;
                        Self::flatten(&gradient(&u), y);
                        Ok(())
                    },
                    eig,
                )?;
                (e.value.max(0.0).sqrt(), e.iterations)
            }
            Which::C => {
                // C C^* = A^{-1} (-div ∇) A^{-1} on node fields
                let e = power_iteration(
                    nf,
                    |x, y| {
                        let w = self.scalar(self.solve(x)?)?;
                        let mut b = divergence_adjoint(&gradient(&w)).into_values();
                        b.iter_mut().for_each(|v| *v = -*v);
                        y.copy_from_slice(&self.solve(&b)?);
                        Ok(())
                    },
                    eig,
                )?;
                (e.value.max(0.0).sqrt(), e.iterations)
            }
        };
        Ok(self.row(which, 2.0, value, EstimateKind::ExactP2, iterations))
    }

    /// Ratio `‖output‖_p / ‖datum‖_p` for one scalar datum `F`.
    pub fn ratio_scalar(&self, which: Which, p: f64, big_f: &ScalarField<T>) -> Result<f64> {
        let den = big_f.lp_norm(p)?.as_f64();
        if den == 0.0 {
            return Ok(0.0);
        }
        let u = self.scalar(self.solve(big_f.values())?)?;
        let num = if which.measures_gradient() { gradient(&u).lp_norm(p)? } else { u.lp_norm(p)? };
        Ok(num.as_f64() / den)
    }

    /// Ratio `‖output‖_p / ‖datum‖_p` for one vector datum `f`.
    pub fn ratio_vector(&self, which: Which, p: f64, f: &VectorField<T>) -> Result<f64> {
        let den = f.lp_norm(p)?.as_f64();
        if den == 0.0 {
            return Ok(0.0);
        }
        let b = divergence_adjoint(f).into_values();
        let u = self.scalar(self.solve(&b)?)?;
        let num = if which.measures_gradient() { gradient(&u).lp_norm(p)? } else { u.lp_norm(p)? };
        Ok(num.as_f64() / den)
    }

    /// Certified lower bounds from the extremal function `u = χ φ` built on
    /// this grid: the datum is `F = -Δu` (for `D`, `B`) or `f = -∇u` (for
    /// `C`), so the ratio needs no solve.
    pub fn cutoff_lower_bound(&self, which: Which, p: f64, u: &ScalarField<T>) -> Result<OperatorNormEstimate> {
        if !Arc::ptr_eq(u.grid(), self.grid()) && !u.grid().same_layout(self.grid()) {
            return Err(Error::GridMismatch);
        }
        let grad = gradient(u);
        let value = match which {
            Which::D | Which::B => {
                let f = self.solver.operator().apply_vec(u.values());
                let den = crate::calculus::lp_norm_slice(&f, p, self.grid().cell_volume())?.as_f64();
                let num = if which == Which::B { grad.lp_norm(p)? } else { u.lp_norm(p)? };
                num.as_f64() / den
            }
            Which::C => u.lp_norm(p)?.as_f64() / grad.lp_norm(p)?.as_f64(),
            Which::A => return Err(Error::Unsupported("no corrector-cutoff construction for A".into())),
        };
        Ok(self.row(which, p, value, EstimateKind::LowerBound, 0))
    }

    /// Best ratio over seeded random data from three families: white noise,
    /// single-cell bumps and perturbations of the domain's torsion function.
    pub fn random_search(&self, which: Which, p: f64, trials: usize, seed: u64) -> Result<OperatorNormEstimate> {
        let grid = self.grid().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let torsion = self.scalar(self.solve(&vec![T::one(); grid.fluid_count()])?)?;
        let eps = T::lit(grid.info().epsilon);
        let d = grid.dim();
        let mut best = 0.0f64;
        for t in 0..trials {
            let family = t % 3;
            let value = match family {
                0 => {
                    if which.vector_datum() {
                        let f = VectorField::from_fn(grid.clone(), |_, _| T::lit(rng.sample(StandardNormal)));
                        self.ratio_vector(which, p, &f)?
                    } else {
                        let f = ScalarField::from_fn(grid.clone(), |_| T::lit(rng.sample(StandardNormal)));
                        self.ratio_scalar(which, p, &f)?
                    }
                }
                1 => {
                    // a smooth bump filling one lattice cell chosen at random
                    let node = grid.fluid_nodes()[rng.random_range(0..grid.fluid_count())] as usize;
                    let c = grid.coords(node);
                    let axis = rng.random_range(0..d);
                    let radius = eps * T::lit(0.5);
                    let bump = |x: [T; 3]| {
                        let r2 = (0..d).map(|a| (x[a] - c[a]) * (x[a] - c[a])).sum::<T>() / (radius * radius);
                        if r2 < T::one() {
                            (T::one() - r2) * (T::one() - r2)
                        } else {
                            T::zero()
                        }
                    };
                    if which.vector_datum() {
                        let f = VectorField::from_fn(grid.clone(), |x, a| if a == axis { bump(x) } else { T::zero() });
                        self.ratio_vector(which, p, &f)?
                    } else {
                        self.ratio_scalar(which, p, &ScalarField::from_fn(grid.clone(), bump))?
                    }
                }
                _ => {
                    let amp = T::lit(0.1);
                    let mut w = torsion.clone();
                    w.values_mut().iter_mut().for_each(|v| *v *= T::one() + amp * T::lit(rng.sample(StandardNormal)));
                    if which.vector_datum() {
                        let mut f = gradient(&w);
                        f.scale(-T::one());
                        self.ratio_vector(which, p, &f)?
                    } else {
                        self.ratio_scalar(which, p, &w)?
                    }
                }
            };
            best = best.max(value);
        }
        Ok(self.row(which, p, best, EstimateKind::RandomSearchLowerBound, trials))
    }

    /// Measured `‖∇u‖_p / ((εη)^{-1}‖u‖_p + ‖F‖_p + ‖f‖_p)` for one datum.
    pub fn localization_ratio(&self, p: f64, big_f: &ScalarField<T>, f: &VectorField<T>) -> Result<f64> {
        let rhs = crate::calculus::rhs_from_data(big_f, f)?;
        let u = self.scalar(self.solve(&rhs)?)?;
        let info = self.grid().info();
        let scale = 1.0 / (info.epsilon * info.eta);
        let den = scale * u.lp_norm(p)?.as_f64() + big_f.lp_norm(p)?.as_f64() + f.lp_norm(p)?.as_f64();
        Ok(gradient(&u).lp_norm(p)?.as_f64() / den)
    }
}

/// How to bound a norm from below at general `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// Corrector times a radius-`R` cutoff. `None` takes `R → ∞`.
    CorrectorCutoff { r: Option<f64> },
    RandomSearch { trials: usize, seed: u64 },
}

impl Strategy {
    pub fn random_search() -> Self {
        Strategy::RandomSearch { trials: 32, seed: 0x5eed }
    }
}

/// `R → ∞` limit of the corrector-cutoff bounds on the lattice at
/// `(ε, η)`, from the periodic corrector:
///
/// * `D_p ≥ ε² ‖χ‖_p / (η^{d-2} |Y_f|^{1/p})`
/// * `B_p ≥ ε ‖∇χ‖_p / (η^{d-2} |Y_f|^{1/p})`
/// * `C_p ≥ ε max(‖χ‖_p / ‖∇χ‖_p, B_{p'}-bound)`
///
/// Each is the limit of ratios that are themselves certified bounds.
pub fn corrector_limit_bound(corr: &CorrectorResult<f64>, which: Which, p: f64, epsilon: f64) -> Result<f64> {
    crate::calculus::check_exponent(p)?;
    let load = corr.load;
    let need = |m: &std::collections::BTreeMap<String, f64>, q: f64| {
        m.get(&crate::corrector::p_key(q)).copied().ok_or_else(|| {
            Error::Config(format!("corrector statistics lack p = {q}; include it in the p set"))
        })
    };
    let fluid = |q: f64| corr.fluid_measure.powf(1.0 / q);
    let unit = match which {
        Which::D => need(&corr.chi_norms, p)? / (load * fluid(p)),
        Which::B => need(&corr.grad_norms, p)? / (load * fluid(p)),
        Which::C => {
            let q = p / (p - 1.0);
            let direct = need(&corr.chi_norms, p)? / need(&corr.grad_norms, p)?;
            let dual = need(&corr.grad_norms, q)? / (load * fluid(q));
            direct.max(dual)
        }
        Which::A => return Err(Error::Unsupported("no corrector-cutoff construction for A".into())),
    };
    Ok(epsilon.powi(which.epsilon_power()) * unit)
}

/// Lattice norm at `p = 2`, through the periodic cell of side `ε`.
pub fn lattice_norm_p2(
    shape: &HoleShape<f64>,
    epsilon: f64,
    eta: f64,
    d: usize,
    h: f64,
    which: Which,
    build: &BuildOptions,
    solver: SolverOptions,
    eig: &EigenOptions,
) -> Result<OperatorNormEstimate> {
    let spec = DomainSpec { d, epsilon, eta, shape: *shape, host: Host::UnitCell { boundary: CellBoundary::Periodic } };
    NormProblem::new(&spec, h, build, solver)?.norm_p2(which, eig)
}

/// Lower bound at general `p` on the lattice `ω_{ε,η}`.
///
/// `CorrectorCutoff { r: None }` uses the `R → ∞` limit from the cell
/// corrector; `Some(R)` evaluates `χ φ_R` on the truncated lattice
/// `[-2R, 2R]^d`. Random search runs on the truncated lattice with
/// `R = 1` unless a radius is implied by the strategy.
pub fn empirical_lower_bound_p(
    shape: &HoleShape<f64>,
    epsilon: f64,
    eta: f64,
    d: usize,
    h: f64,
    which: Which,
    p: f64,
    strategy: Strategy,
    opts: &CellOptions,
) -> Result<OperatorNormEstimate> {
    crate::calculus::check_exponent(p)?;
    match strategy {
        Strategy::CorrectorCutoff { r } => {
            let q = p / (p - 1.0);
            let cell = CellProblem::periodic(shape, eta, h / epsilon, d, opts)?;
            let corr = cell.corrector(&[p, q], 1.0)?;
            match r {
                None => Ok(OperatorNormEstimate {
                    which,
                    p,
                    epsilon,
                    eta,
                    value: corrector_limit_bound(&corr, which, p, epsilon)?,
                    kind: EstimateKind::LowerBound,
                    grid_h: h,
                    iterations: corr.iterations,
                    domain: DomainTag::Lattice,
                }),
                Some(r) => {
                    let spec = DomainSpec { d, epsilon, eta, shape: *shape, host: Host::TruncatedLattice { r } };
                    let problem = NormProblem::new(&spec, h, &opts.build, opts.solver)?;
                    let phi = crate::corrector::cutoff_bump(r, problem.grid())?;
                    let u = crate::corrector::extremal_function(&corr, &phi)?;
                    problem.cutoff_lower_bound(which, p, &u)
                }
            }
        }
        Strategy::RandomSearch { trials, seed } => {
            let spec = DomainSpec { d, epsilon, eta, shape: *shape, host: Host::TruncatedLattice { r: 1.0 } };
            NormProblem::new(&spec, h, &opts.build, opts.solver)?.random_search(which, p, trials, seed)
        }
    }
}

/// Ratios of `p = 2` norms between `(ε, η)` on `Ω` and `(1, η)` on `Ω/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescalingReport {
    pub epsilon: f64,
    pub eta: f64,
    pub d_ratio: f64,
    pub c_ratio: f64,
    pub a_ratio: f64,
    /// Deviations from `ε²`, `ε` and `1`, relative.
    pub d_deviation: f64,
    pub c_deviation: f64,
    pub a_deviation: f64,
}

/// Compares a bounded-domain spec at `(ε, η)` and spacing `h` with the
/// blown-up domain at `(1, η)` and spacing `h/ε`.
pub fn rescaling_check(
    spec: &DomainSpec<f64>,
    h: f64,
    reference_h: f64,
    build: &BuildOptions,
    solver: SolverOptions,
    eig: &EigenOptions,
) -> Result<RescalingReport> {
    let Host::Bounded { side } = spec.host else {
        return Err(Error::Config("rescaling check needs a bounded host".into()));
    };
    let eps = spec.epsilon;
    if ((reference_h * eps - h) / h).abs() > 1e-9 {
        return Err(Error::ResolutionMismatch(format!(
            "reference spacing {reference_h} is not h/ε = {}",
            h / eps
        )));
    }
    let reference = DomainSpec { epsilon: 1.0, host: Host::Bounded { side: side / eps }, ..*spec };
    let small = NormProblem::new(spec, h, build, solver)?;
    let big = NormProblem::new(&reference, reference_h, build, solver)?;
    let ratio = |w| -> Result<f64> { Ok(small.norm_p2(w, eig)?.value / big.norm_p2(w, eig)?.value) };
    let (d_ratio, c_ratio, a_ratio) = (ratio(Which::D)?, ratio(Which::C)?, ratio(Which::A)?);
    Ok(RescalingReport {
        epsilon: eps,
        eta: spec.eta,
        d_ratio,
        c_ratio,
        a_ratio,
        d_deviation: (d_ratio / (eps * eps) - 1.0).abs(),
        c_deviation: (c_ratio / eps - 1.0).abs(),
        a_deviation: (a_ratio - 1.0).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub b2: f64,
    pub c2: f64,
    pub lambda_min: f64,
    /// `|B₂ - C₂| / B₂`.
    pub relative_gap: f64,
    /// `B₂² λ_min`.
    pub energy_product: f64,
}

pub fn duality_check<T: Real>(problem: &NormProblem<T>, eig: &EigenOptions) -> Result<DualityReport> {
    let b2 = problem.norm_p2(Which::B, eig)?.value;
    let c2 = problem.norm_p2(Which::C, eig)?.value;
    let lambda_min = 1.0 / problem.norm_p2(Which::D, eig)?.value;
    Ok(DualityReport { b2, c2, lambda_min, relative_gap: (b2 - c2).abs() / b2, energy_product: b2 * b2 * lambda_min })
}

/// Best constant in `‖u‖₂² ≤ C ‖∇u‖₂²` over grid functions vanishing on the
/// grid's Dirichlet nodes: `1/λ_min`. Fails when nothing pins the constant.
pub fn poincare_constant<T: Real>(grid: &Arc<Grid<T>>, solver: SolverOptions, eig: &EigenOptions) -> Result<f64> {
    let op = Arc::new(assemble_laplacian(grid)?);
    let s = Solver::new(op, solver)?;
    Ok(1.0 / smallest_eigenvalue_with(&s, eig)?.value)
}

/// Poincaré constant of the cell `Y \ ηT` with natural outer faces.
pub fn cell_poincare(shape: &HoleShape<f64>, eta: f64, h: f64, d: usize, opts: &CellOptions, eig: &EigenOptions) -> Result<f64> {
    let cell = CellProblem::new(shape, eta, h, d, CellBoundary::Neumann, opts)?;
    Ok(1.0 / cell.smallest_eigenvalue(eig)?.value)
}
