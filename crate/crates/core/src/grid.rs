//! Uniform Cartesian grids over axis-aligned boxes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[min, max]` in dimensionless units (1 unit = 10 cm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    /// Box given as `(x0, x1, y0, y1, z0, z1)`.
    pub fn from_ranges(x: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Self {
        Self::new([x.0, y.0, z.0], [x.1, y.1, z.1])
    }

    /// The computational domain `(-2.5, 2.5)^2 x (-0.75, 4.25)`.
    pub fn default_domain() -> Self {
        Self::from_ranges((-2.5, 2.5), (-2.5, 2.5), (-0.75, 4.25))
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|a| !(self.extent(a) > 0.0) || !self.min[a].is_finite() || !self.max[a].is_finite())
    }

    /// Open-box membership.
    pub fn contains_open(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }

    pub fn contains_closed(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// True when `other` lies inside `self` (closed containment).
    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| 0.5 * (self.min[a] + self.max[a]))
    }

    pub fn diameter(&self) -> f64 {
        (0..3).map(|a| self.extent(a).powi(2)).sum::<f64>().sqrt()
    }

    /// The box shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Aabb {
        Aabb::new(self.min.map(|v| v + margin), self.max.map(|v| v - margin))
    }
}

/// A uniform node-centred grid. Node `(i, j, k)` sits at
/// `origin + spacing * (i, j, k)`, and linear indices are x-fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl Grid3 {
    pub fn new(origin: [f64; 3], spacing: [f64; 3], dims: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if !(spacing[a] > 0.0) || !spacing[a].is_finite() {
                return Err(Error::invalid(format!("spacing on axis {a} must be positive, got {}", spacing[a])));
            }
            if dims[a] < 2 {
                return Err(Error::invalid(format!("dims on axis {a} must be at least 2, got {}", dims[a])));
            }
            if !origin[a].is_finite() {
                return Err(Error::invalid("non-finite grid origin"));
            }
        }
        Ok(Self { origin, spacing, dims })
    }

    /// Cover `bbox` with nodes no further apart than `spacing`, landing exactly on
    /// the box faces. The per-axis spacing is shrunk as needed to do so.
    pub fn covering(bbox: &Aabb, spacing: f64) -> Result<Self> {
        if bbox.is_degenerate() {
            return Err(Error::invalid("degenerate box"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        let shortest = (0..3).map(|a| bbox.extent(a)).fold(f64::INFINITY, f64::min);
        if spacing > shortest {
            return Err(Error::invalid(format!(
                "spacing {spacing} exceeds the shortest box edge {shortest}"
            )));
        }
        let mut dims = [0; 3];
        let mut h = [0.0; 3];
        for a in 0..3 {
            let len = bbox.extent(a);
            // Tolerate round-off in len/spacing so that 1.0/0.5 gives 2 cells, not 3.
            let cells = ((len / spacing) - 1e-9).ceil().max(1.0) as usize;
            dims[a] = cells + 1;
            h[a] = len / cells as f64;
        }
        Self::new(bbox.min, h, dims)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + self.spacing[axis] * i as f64
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        self.node(i, j, k)
    }

    pub fn upper(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.coord(a, self.dims[a] - 1))
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::new(self.origin, self.upper())
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i + 1 == self.dims[0] || j + 1 == self.dims[1] || k + 1 == self.dims[2]
    }

    /// Geometric equality up to a relative tolerance on spacing and origin.
    pub fn matches(&self, other: &Grid3) -> bool {
        self.dims == other.dims
            && (0..3).all(|a| {
                let scale = self.spacing[a].abs().max(1.0);
                (self.spacing[a] - other.spacing[a]).abs() <= 1e-12 * scale
                    && (self.origin[a] - other.origin[a]).abs() <= 1e-9 * scale
            })
    }

    pub fn ensure_matches(&self, other: &Grid3, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")))
        }
    }

    /// Equal spacing on all axes to within `tol` (relative).
    pub fn is_isotropic(&self, tol: f64) -> bool {
        let h = self.spacing[0];
        self.spacing.iter().all(|s| (s - h).abs() <= tol * h)
    }

    /// Index of the node nearest to `x` along `axis`, if it lies within the grid.
    pub fn nearest_index(&self, axis: usize, x: f64) -> Option<usize> {
        let t = ((x - self.origin[axis]) / self.spacing[axis]).round();
        if t < 0.0 || t > (self.dims[axis] - 1) as f64 {
            None
        } else {
            Some(t as usize)
        }
    }
}
