use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Node classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Fluid = 0,
    Hole = 1,
    Exterior = 2,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Treatment of the two faces orthogonal to an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisMode {
    /// Opposite faces identified; `n` nodes with wrap-around.
    Periodic,
    /// First and last node are exterior (zero data).
    Dirichlet,
    /// Natural boundary: edges leaving the box are dropped.
    Neumann,
}

/// Which construction produced a grid; carried for reporting and for
/// consistency checks between grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub epsilon: f64,
    pub eta: f64,
}

pub(crate) const NO_FLUID: u32 = u32::MAX;

/// Uniform structured grid in 2 or 3 dimensions with node labels.
///
/// Node `(i, j, k)` sits at `origin + h * (i, j, k)` and has linear index
/// `i + n0 * (j + n1 * k)`. Unused axes have extent 1.
#[derive(Debug, Clone)]
pub struct Grid<T = f64> {
    dim: usize,
    h: T,
    origin: [T; 3],
    shape: [usize; 3],
    modes: [AxisMode; 3],
    labels: Vec<Label>,
    fluid_index: Vec<u32>,
    fluid_nodes: Vec<u32>,
    info: GridInfo,
}

impl<T: Real> Grid<T> {
    /// Classifies every node with `classify(coords)`. Nodes on the first and
    /// last layer of a Dirichlet axis are always exterior.
    pub(crate) fn classify(
        dim: usize,
        h: T,
        origin: [T; 3],
        shape: [usize; 3],
        modes: [AxisMode; 3],
        info: GridInfo,
        mut classify: impl FnMut(&[T]) -> Label,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        let total: usize = shape.iter().product();
        if total > u32::MAX as usize - 1 {
            return Err(Error::TooLarge { nodes: total, bytes: 0, cap: u32::MAX as usize - 1 });
        }
        let mut labels = Vec::with_capacity(total);
        let mut point = [T::zero(); 3];
        for k in 0..shape[2] {
            for j in 0..shape[1] {
                for i in 0..shape[0] {
                    let c = [i, j, k];
                    let on_wall = (0..dim).any(|a| {
                        modes[a] == AxisMode::Dirichlet && (c[a] == 0 || c[a] + 1 == shape[a])
                    });
                    if on_wall {
                        labels.push(Label::Exterior);
                        continue;
                    }
                    for a in 0..dim {
                        point[a] = origin[a] + h * T::from_usize_lossy(c[a]);
                    }
                    labels.push(classify(&point[..dim]));
                }
            }
        }
        Self::from_labels(dim, h, origin, shape, modes, info, labels)
    }

    pub(crate) fn from_labels(
        dim: usize,
        h: T,
        origin: [T; 3],
        shape: [usize; 3],
        modes: [AxisMode; 3],
        info: GridInfo,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let mut fluid_index = vec![NO_FLUID; labels.len()];
        let mut fluid_nodes = Vec::new();
        for (idx, l) in labels.iter().enumerate() {
            if *l == Label::Fluid {
                fluid_index[idx] = fluid_nodes.len() as u32;
                fluid_nodes.push(idx as u32);
            }
        }
        if fluid_nodes.is_empty() {
            return Err(Error::EmptyFluid);
        }
        Ok(Self { dim, h, origin, shape, modes, labels, fluid_index, fluid_nodes, info })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> T {
        self.h
    }

    pub fn origin(&self) -> [T; 3] {
        self.origin
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn modes(&self) -> [AxisMode; 3] {
        self.modes
    }

    pub fn mode(&self, axis: usize) -> AxisMode {
        self.modes[axis]
    }

    pub fn info(&self) -> GridInfo {
        self.info
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn fluid_count(&self) -> usize {
        self.fluid_nodes.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> Label {
        self.labels[idx]
    }

    pub fn is_fluid(&self, idx: usize) -> bool {
        self.labels[idx] == Label::Fluid
    }

    /// Full-grid indices of the fluid nodes, in increasing order.
    pub fn fluid_nodes(&self) -> &[u32] {
        &self.fluid_nodes
    }

    /// Compact (fluid) index of a full-grid node.
    pub fn fluid_index(&self, idx: usize) -> Option<usize> {
        match self.fluid_index[idx] {
            NO_FLUID => None,
            i => Some(i as usize),
        }
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> T {
        self.h.powi(self.dim as i32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[0] * self.shape[1],
        }
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.shape[0];
        let r = idx / self.shape[0];
        [i, r % self.shape[1], r / self.shape[1]]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.shape[0] * (ijk[1] + self.shape[1] * ijk[2])
    }

    pub fn coords(&self, idx: usize) -> [T; 3] {
        let c = self.ijk(idx);
        let mut x = [T::zero(); 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + self.h * T::from_usize_lossy(c[a]);
        }
        x
    }

    /// Neighbour of `idx` one step along `axis` (`forward` = increasing index),
    /// honouring periodic wrap. `None` when the edge leaves a non-periodic box.
    #[inline]
    pub fn neighbor(&self, idx: usize, c: [usize; 3], axis: usize, forward: bool) -> Option<usize> {
        let n = self.shape[axis];
        let s = self.stride(axis);
        if forward {
            if c[axis] + 1 < n {
                Some(idx + s)
            } else if self.modes[axis] == AxisMode::Periodic {
                Some(idx + s - n * s)
            } else {
                None
            }
        } else if c[axis] > 0 {
            Some(idx - s)
        } else if self.modes[axis] == AxisMode::Periodic {
            Some(idx + (n - 1) * s)
        } else {
            None
        }
    }

    /// Whether two grids describe the same discretisation.
    pub fn same_layout(&self, other: &Grid<T>) -> bool {
        self.dim == other.dim
            && self.h == other.h
            && self.origin == other.origin
            && self.shape == other.shape
            && self.modes == other.modes
            && self.labels == other.labels
    }
}
