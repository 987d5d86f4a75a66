use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hole profile in unit-cell coordinates, `Y = [-1/2, 1/2]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeKind<T> {
    Ball { radius: T },
    Cube { half_width: T },
    /// Semi-axes along x, y, z; only the first `d` are used.
    Ellipsoid { semi_axes: [T; 3] },
}

/// A closed hole `T` together with its margin `c0`: `B(0, c0) ⊆ T` and
/// `dist(∂T, ∂Y) ≥ c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleShape<T> {
    pub kind: ShapeKind<T>,
    pub c0: T,
}

impl<T: Real> HoleShape<T> {
    /// Builds a shape with the largest admissible margin.
    pub fn new(kind: ShapeKind<T>) -> Result<Self> {
        let c0 = max_margin(&kind);
        Self::with_margin(kind, c0)
    }

    pub fn ball(radius: T) -> Result<Self> {
        Self::new(ShapeKind::Ball { radius })
    }

    pub fn cube(half_width: T) -> Result<Self> {
        Self::new(ShapeKind::Cube { half_width })
    }

    pub fn ellipsoid(semi_axes: [T; 3]) -> Result<Self> {
        Self::new(ShapeKind::Ellipsoid { semi_axes })
    }

    pub fn with_margin(kind: ShapeKind<T>, c0: T) -> Result<Self> {
        let sizes: Vec<T> = match kind {
            ShapeKind::Ball { radius } => vec![radius],
            ShapeKind::Cube { half_width } => vec![half_width],
            ShapeKind::Ellipsoid { semi_axes } => semi_axes.to_vec(),
        };
        if sizes.iter().any(|s| !s.is_finite() || *s <= T::zero()) {
            return Err(Error::Config(format!("hole size parameters must be positive: {kind:?}")));
        }
        if !(c0 > T::zero()) {
            return Err(Error::Config(format!("margin c0 must be positive, got {c0}")));
        }
        if c0 > max_margin(&kind) * (T::one() + T::lit(1e-12)) {
            return Err(Error::Config(format!(
                "margin c0 = {c0} violates B(0,c0) ⊆ T or dist(∂T,∂Y) ≥ c0 for {kind:?}"
            )));
        }
        Ok(Self { kind, c0 })
    }

    /// Membership of a point given in unit-cell coordinates. Closed set.
    pub fn contains(&self, point: &[T]) -> bool {
        match self.kind {
            ShapeKind::Ball { radius } => {
                let r2: T = point.iter().map(|&x| x * x).sum();
                r2 <= radius * radius
            }
            ShapeKind::Cube { half_width } => point.iter().all(|x| x.abs() <= half_width),
            ShapeKind::Ellipsoid { semi_axes } => {
                let s: T = point
                    .iter()
                    .zip(semi_axes.iter())
                    .map(|(&x, &a)| (x / a) * (x / a))
                    .sum();
                s <= T::one()
            }
        }
    }

    /// Radius of the smallest centred ball containing `T` in dimension `d`.
    pub fn circumradius(&self, d: usize) -> T {
        match self.kind {
            ShapeKind::Ball { radius } => radius,
            ShapeKind::Cube { half_width } => half_width * T::from_usize_lossy(d).sqrt(),
            ShapeKind::Ellipsoid { semi_axes } => semi_axes[..d]
                .iter()
                .fold(T::zero(), |m, &a| m.max(a)),
        }
    }
}

fn max_margin<T: Real>(kind: &ShapeKind<T>) -> T {
    let half = T::lit(0.5);
    match *kind {
        ShapeKind::Ball { radius } => radius.min(half - radius),
        ShapeKind::Cube { half_width } => half_width.min(half - half_width),
        ShapeKind::Ellipsoid { semi_axes } => {
            let lo = semi_axes.iter().fold(T::infinity(), |m, &a| m.min(a));
            let hi = semi_axes.iter().fold(T::zero(), |m, &a| m.max(a));
            lo.min(half - hi)
        }
    }
}

/// Checked membership predicate; rejects malformed points.
pub fn shape_contains<T: Real>(shape: &HoleShape<T>, point: &[T]) -> Result<bool> {
    if !(2..=3).contains(&point.len()) {
        return Err(Error::Config(format!(
            "points must have 2 or 3 coordinates, got {}",
            point.len()
        )));
    }
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("point has non-finite coordinates".into()));
    }
    Ok(shape.contains(point))
}
