//! Closed-form scaling predictions for every measured quantity.

use std::fmt;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::norms::Which;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    A,
    B,
    C,
    D,
    Poincare,
    CorrectorGrad,
    CorrectorInt,
}

impl Quantity {
    pub fn norm(self) -> Option<Which> {
        match self {
            Quantity::A => Some(Which::A),
            Quantity::B => Some(Which::B),
            Quantity::C => Some(Which::C),
            Quantity::D => Some(Which::D),
            _ => None,
        }
    }

    pub fn is_corrector(self) -> bool {
        matches!(self, Quantity::CorrectorGrad | Quantity::CorrectorInt)
    }

    /// Quantities whose value does not depend on `p`; they are tabulated
    /// and measured at `p = 2` only.
    pub fn p_independent(self) -> bool {
        matches!(self, Quantity::Poincare | Quantity::CorrectorInt)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Quantity::A => "A",
            Quantity::B => "B",
            Quantity::C => "C",
            Quantity::D => "D",
            Quantity::Poincare => "poincare",
            Quantity::CorrectorGrad => "corrector-grad",
            Quantity::CorrectorInt => "corrector-int",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Lattice,
    /// Crossover parameter above 1: holes too small to matter.
    BoundedSmallHoles,
    /// Crossover parameter at most 1: the lattice behaviour dominates.
    BoundedLargeHoles,
}

/// `σ_ε = ε η^{1 - d/2}` for `d ≥ 3`; for `d = 2` the logarithmic analogue
/// `ε |ln(η/2)|^{1/2}`, so that `σ_ε²` is the lattice scale of `D₂` in both cases.
pub fn crossover(d: usize, epsilon: f64, eta: f64) -> f64 {
    if d == 2 {
        epsilon * (eta / 2.0).ln().abs().sqrt()
    } else {
        epsilon * eta.powf(1.0 - d as f64 / 2.0)
    }
}

pub fn bounded_regime(d: usize, epsilon: f64, eta: f64) -> Regime {
    if crossover(d, epsilon, eta) <= 1.0 {
        Regime::BoundedLargeHoles
    } else {
        Regime::BoundedSmallHoles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Lower,
    Upper,
    TwoSided,
}

/// Dependence on `η` as `η → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum EtaLaw {
    /// `η^exponent`.
    Power { exponent: Rational64 },
    /// `|ln(η/2)|^power`.
    LogLaw { power: Rational64 },
    /// `η^exponent |ln(η/2)|^log_power`.
    PowerLog { exponent: Rational64, log_power: Rational64 },
}

impl EtaLaw {
    pub fn power(e: Rational64) -> Self {
        EtaLaw::Power { exponent: e }
    }

    /// Power-law exponent, when the law has one.
    pub fn exponent(&self) -> Option<Rational64> {
        match *self {
            EtaLaw::Power { exponent } | EtaLaw::PowerLog { exponent, .. } => Some(exponent),
            EtaLaw::LogLaw { .. } => None,
        }
    }

    pub fn eval(&self, eta: f64) -> f64 {
        let l = (eta / 2.0).ln().abs();
        match *self {
            EtaLaw::Power { exponent } => eta.powf(r2f(exponent)),
            EtaLaw::LogLaw { power } => l.powf(r2f(power)),
            EtaLaw::PowerLog { exponent, log_power } => eta.powf(r2f(exponent)) * l.powf(r2f(log_power)),
        }
    }
}

impl fmt::Display for EtaLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaLaw::Power { exponent } => write!(f, "eta^({exponent})"),
            EtaLaw::LogLaw { power } => write!(f, "|ln(eta/2)|^({power})"),
            EtaLaw::PowerLog { exponent, log_power } => write!(f, "eta^({exponent}) |ln(eta/2)|^({log_power})"),
        }
    }
}

pub fn r2f(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremPrediction {
    pub id: String,
    pub d: usize,
    pub p: f64,
    pub quantity: Quantity,
    pub epsilon_exponent: Rational64,
    pub eta_law: EtaLaw,
    pub side: Side,
    /// Upper bound obtained by interpolation: true only up to an arbitrarily
    /// small loss `δ` in the exponent.
    pub delta_loss: bool,
    pub regime: Regime,
}

/// Rational approximation of an exponent `p` given as a float.
pub fn rational_p(p: f64) -> Rational64 {
    Rational64::approximate_float(p).unwrap_or_else(|| Rational64::from_integer(2))
}

struct Builder {
    d: usize,
    p: f64,
    out: Vec<TheoremPrediction>,
}

impl Builder {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, id: &str, q: Quantity, eps: Rational64, law: EtaLaw, side: Side, delta: bool, regime: Regime) {
        self.out.push(TheoremPrediction {
            id: id.to_string(),
            d: self.d,
            p: if q.p_independent() { 2.0 } else { self.p },
            quantity: q,
            epsilon_exponent: eps,
            eta_law: law,
            side,
            delta_loss: delta,
            regime,
        });
    }
}

/// The full prediction table for dimension `d ∈ {2, 3}` and exponent `p`.
/// Entries for `p`-independent quantities appear only for `p = 2`.
pub fn theorem_predictions(d: usize, p: f64) -> Vec<TheoremPrediction> {
    let r = |n: i64, m: i64| Rational64::new(n, m);
    let int = Rational64::from_integer;
    let one = int(1);
    let zero = int(0);
    let di = d as i64;
    let dr = int(di);
    let pr = rational_p(p);
    let p2 = (p - 2.0).abs() < 1e-12;
    let conj = pr / (pr - one);
    let s = num_traits::Signed::abs(&(r(1, 2) - one / pr));
    let planar = d == 2;
    let mut b = Builder { d, p, out: Vec::new() };
    use Quantity as Q;
    use Regime::*;
    use Side::*;

    // full lattice
    let d_law = if planar { EtaLaw::LogLaw { power: one } } else { EtaLaw::power(int(2 - di)) };
    let half_law = if planar { EtaLaw::LogLaw { power: r(1, 2) } } else { EtaLaw::power(r(2 - di, 2)) };
    b.push("lattice-D", Q::D, int(2), d_law, TwoSided, false, Lattice);
    if p >= 2.0 {
        b.push("lattice-C-large-p", Q::C, one, half_law, TwoSided, false, Lattice);
    }
    if p <= 2.0 {
        b.push("lattice-B-small-p", Q::B, one, half_law, TwoSided, false, Lattice);
    }
    if p < 2.0 {
        let law = EtaLaw::power(one - dr / pr);
        b.push("lattice-C-small-p-lower", Q::C, one, law, Lower, false, Lattice);
        b.push("lattice-C-small-p-upper", Q::C, one, law, Upper, true, Lattice);
    }
    if p > 2.0 {
        let law = EtaLaw::power(one - dr + dr / pr);
        b.push("lattice-B-large-p-lower", Q::B, one, law, Lower, false, Lattice);
        b.push("lattice-B-large-p-upper", Q::B, one, law, Upper, true, Lattice);
    }
    let a_exp = -dr * s;
    let a_lower = if planar && !p2 {
        EtaLaw::PowerLog { exponent: a_exp, log_power: r(-1, 2) }
    } else {
        EtaLaw::power(a_exp)
    };
    b.push("lattice-A-lower", Q::A, zero, a_lower, Lower, false, Lattice);
    b.push("lattice-A-upper", Q::A, zero, EtaLaw::power(a_exp), Upper, !p2, Lattice);

    // bounded host, one entry per regime
    let flat = EtaLaw::power(zero);
    b.push("bounded-D-large-holes", Q::D, int(2), d_law, Upper, false, BoundedLargeHoles);
    b.push("bounded-D-small-holes", Q::D, zero, flat, Upper, false, BoundedSmallHoles);
    if p <= 2.0 {
        b.push("bounded-B-small-p-large-holes", Q::B, one, half_law, Upper, false, BoundedLargeHoles);
        b.push("bounded-B-small-p-small-holes", Q::B, zero, flat, Upper, false, BoundedSmallHoles);
    }
    if p >= 2.0 {
        b.push("bounded-C-large-p-large-holes", Q::C, one, half_law, Upper, false, BoundedLargeHoles);
        b.push("bounded-C-large-p-small-holes", Q::C, zero, flat, Upper, false, BoundedSmallHoles);
    }
    b.push("bounded-A-large-holes", Q::A, zero, EtaLaw::power(-dr * s), Upper, !p2, BoundedLargeHoles);
    b.push("bounded-A-small-holes", Q::A, int(-2) * s, EtaLaw::power(int(-2) * s), Upper, !p2, BoundedSmallHoles);
    if p > 2.0 {
        let small = int(-1) + int(2) / pr;
        b.push("bounded-B-large-p-large-holes", Q::B, one, EtaLaw::power(one - dr + dr / pr), Upper, true, BoundedLargeHoles);
        b.push("bounded-B-large-p-small-holes", Q::B, small, EtaLaw::power(small), Upper, true, BoundedSmallHoles);
    }
    if p < 2.0 {
        let small = int(-1) + int(2) / conj;
        b.push("bounded-C-small-p-large-holes", Q::C, one, EtaLaw::power(one - dr / pr), Upper, true, BoundedLargeHoles);
        b.push("bounded-C-small-p-small-holes", Q::C, small, EtaLaw::power(small), Upper, true, BoundedSmallHoles);
    }

    // cell quantities
    if p2 {
        b.push("poincare", Q::Poincare, int(2), d_law, TwoSided, false, Lattice);
        let int_law = if planar { EtaLaw::LogLaw { power: one } } else { flat };
        b.push("corrector-int", Q::CorrectorInt, zero, int_law, TwoSided, false, Lattice);
        let grad = if planar { EtaLaw::LogLaw { power: r(1, 2) } } else { EtaLaw::power(r(di - 2, 2)) };
        b.push("corrector-grad-l2", Q::CorrectorGrad, zero, grad, TwoSided, false, Lattice);
    } else {
        b.push("corrector-grad-lower", Q::CorrectorGrad, zero, EtaLaw::power(dr / pr - one), Lower, false, Lattice);
    }
    b.out
}

/// A set of predictions that sweeps are judged against; the standard table
/// unless a caller substitutes its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub entries: Vec<TheoremPrediction>,
}

impl PredictionTable {
    pub fn standard(ds: &[usize], ps: &[f64]) -> Self {
        let mut entries = Vec::new();
        for &d in ds {
            for &p in ps {
                for e in theorem_predictions(d, p) {
                    if !entries.iter().any(|x: &TheoremPrediction| x.id == e.id && x.d == e.d && x.p == e.p) {
                        entries.push(e);
                    }
                }
            }
        }
        Self { entries }
    }

    pub fn lookup(&self, d: usize, p: f64, quantity: Quantity) -> impl Iterator<Item = &TheoremPrediction> {
        self.entries
            .iter()
            .filter(move |e| e.d == d && e.quantity == quantity && (e.p - p).abs() < 1e-12)
    }

    /// Every distinct prediction id in the standard tables for `d ∈ {2, 3}`.
    pub fn all_ids(ps: &[f64]) -> Vec<String> {
        let mut ids: Vec<String> = Self::standard(&[2, 3], ps).entries.into_iter().map(|e| e.id).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(d: usize, p: f64, id: &str) -> TheoremPrediction {
        theorem_predictions(d, p).into_iter().find(|e| e.id == id).unwrap()
    }

    #[test]
    fn table_examples() {
        let e = find(3, 2.0, "lattice-D");
        assert_eq!(e.epsilon_exponent, Rational64::from_integer(2));
        assert_eq!(e.eta_law.exponent(), Some(Rational64::from_integer(-1)));
        assert_eq!(find(3, 4.0, "lattice-B-large-p-lower").eta_law.exponent(), Some(Rational64::new(-5, 4)));
        assert_eq!(find(3, 3.0, "lattice-A-lower").eta_law.exponent(), Some(Rational64::new(-1, 2)));
        assert_eq!(find(2, 2.0, "lattice-C-large-p").eta_law, EtaLaw::LogLaw { power: Rational64::new(1, 2) });
    }

    #[test]
    fn delta_flags_only_on_interpolated_upper_bounds() {
        for d in [2, 3] {
            for p in [1.5, 2.0, 4.0] {
                for e in theorem_predictions(d, p) {
                    if e.delta_loss {
                        assert_eq!(e.side, Side::Upper, "{}", e.id);
                        assert!(p != 2.0);
                    }
                }
            }
        }
    }

    #[test]
    fn crossover_regimes() {
        assert_eq!(bounded_regime(2, 1.0 / 32.0, 0.125), Regime::BoundedLargeHoles);
        assert_eq!(bounded_regime(2, 1.0, 0.125), Regime::BoundedSmallHoles);
        assert!((crossover(3, 0.5, 0.25) - 1.0).abs() < 1e-15);
    }
}
