//! Dirichlet traces on the six faces of a grid.

use crate::error::{Error, Result};
use crate::field::{ScalarField3, C64};
use crate::grid::Grid3;
use std::sync::Arc;

/// A face of the computational box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::XMin, Face::XMax, Face::YMin, Face::YMax, Face::ZMin, Face::ZMax];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn contains(self, grid: &Grid3, ijk: [usize; 3]) -> bool {
        match self {
            Face::XMin => ijk[0] == 0,
            Face::XMax => ijk[0] + 1 == grid.dims[0],
            Face::YMin => ijk[1] == 0,
            Face::YMax => ijk[1] + 1 == grid.dims[1],
            Face::ZMin => ijk[2] == 0,
            Face::ZMax => ijk[2] + 1 == grid.dims[2],
        }
    }
}

/// Enumeration of the boundary nodes of a grid, in increasing linear index.
#[derive(Debug)]
pub struct BoundaryIndex {
    grid: Grid3,
    nodes: Vec<usize>,
    slot: Vec<u32>,
}

impl BoundaryIndex {
    pub fn new(grid: Grid3) -> Arc<Self> {
        let mut nodes = Vec::new();
        let mut slot = vec![u32::MAX; grid.len()];
        for idx in 0..grid.len() {
            let [i, j, k] = grid.ijk(idx);
            if grid.is_boundary(i, j, k) {
                slot[idx] = nodes.len() as u32;
                nodes.push(idx);
            }
        }
        Arc::new(Self { grid, nodes, slot })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Linear grid indices of the boundary nodes.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Position of grid node `idx` in the trace, if it is a boundary node.
    pub fn slot(&self, idx: usize) -> Option<usize> {
        match self.slot.get(idx) {
            Some(&s) if s != u32::MAX => Some(s as usize),
            _ => None,
        }
    }
}

/// Complex values on every boundary node of a grid.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    index: Arc<BoundaryIndex>,
    values: Vec<C64>,
}

impl PartialEq for BoundaryTrace {
    fn eq(&self, other: &Self) -> bool {
        self.index.grid.matches(&other.index.grid) && self.values == other.values
    }
}

impl BoundaryTrace {
    pub fn new(index: Arc<BoundaryIndex>, values: Vec<C64>) -> Result<Self> {
        if values.len() != index.len() {
            return Err(Error::invalid(format!(
                "boundary trace has {} values, expected {}",
                values.len(),
                index.len()
            )));
        }
        if let Some(n) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { what: "boundary trace", index: index.nodes[n] });
        }
        Ok(Self { index, values })
    }

    /// Sample `f` at the boundary nodes.
    pub fn from_fn(index: Arc<BoundaryIndex>, mut f: impl FnMut([f64; 3]) -> C64) -> Self {
        let values = index.nodes.iter().map(|&n| f(index.grid.node_at(n))).collect();
        Self { index, values }
    }

    pub fn constant(index: Arc<BoundaryIndex>, v: C64) -> Self {
        let values = vec![v; index.len()];
        Self { index, values }
    }

    /// Restriction of a volume field to the boundary.
    pub fn from_field(index: Arc<BoundaryIndex>, f: &ScalarField3) -> Result<Self> {
        index.grid.ensure_matches(f.grid(), "boundary trace of field")?;
        let values = index.nodes.iter().map(|&n| f.values()[n]).collect();
        Ok(Self { index, values })
    }

    pub fn index(&self) -> &Arc<BoundaryIndex> {
        &self.index
    }

    pub fn grid(&self) -> &Grid3 {
        &self.index.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    /// Value at grid node `(i, j, k)`, which must lie on the boundary.
    pub fn at(&self, i: usize, j: usize, k: usize) -> Option<C64> {
        let idx = self.index.grid.index(i, j, k);
        self.index.slot(idx).map(|s| self.values[s])
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { index: self.index.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v * s)
    }

    /// Pairs of `(grid linear index, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.index.nodes.iter().copied().zip(self.values.iter().copied())
    }

    pub fn ensure_compatible(&self, grid: &Grid3) -> Result<()> {
        self.index.grid.ensure_matches(grid, "boundary trace shape")
    }
}
