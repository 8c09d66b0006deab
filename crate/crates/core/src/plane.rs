//! Complex data sampled on a uniform rectangle in a plane `z = const`.

use crate::error::{Error, Result};
use crate::field::{C64, ZERO};
use serde::{Deserialize, Serialize};

/// Node `(i, j)` sits at `(x0 + i dx, y0 + j dy, z)`; storage is x-fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub z: f64,
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

impl PlaneGrid {
    pub fn new(z: f64, nx: usize, ny: usize, x0: f64, y0: f64, dx: f64, dy: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("plane grid needs at least one sample per axis"));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::invalid(format!("plane spacing must be positive, got ({dx}, {dy})")));
        }
        if ![z, x0, y0, dx, dy].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite plane geometry"));
        }
        Ok(Self { z, nx, ny, x0, y0, dx, dy })
    }

    /// Cell-centred `nx x ny` samples over `[xa, xb] x [ya, yb]`.
    pub fn cell_centred(z: f64, (xa, xb): (f64, f64), (ya, yb): (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if !(xb > xa && yb > ya) {
            return Err(Error::invalid("empty plane rectangle"));
        }
        let dx = (xb - xa) / nx as f64;
        let dy = (yb - ya) / ny as f64;
        Self::new(z, nx, ny, xa + 0.5 * dx, ya + 0.5 * dy, dx, dy)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        [self.x(idx % self.nx), self.y(idx / self.nx), self.z]
    }

    pub fn with_z(&self, z: f64) -> Self {
        Self { z, ..*self }
    }

    /// Same sampling rectangle, ignoring `z`.
    pub fn same_sampling(&self, other: &PlaneGrid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.x0 == other.x0
            && self.y0 == other.y0
            && self.dx == other.dx
            && self.dy == other.dy
    }
}

/// A complex field on a plane at wavenumber `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneField {
    grid: PlaneGrid,
    k: f64,
    values: Vec<C64>,
}

impl PlaneField {
    pub fn new(grid: PlaneGrid, k: f64, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "plane field has {} values for {} samples",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { what: "plane field", index });
        }
        Ok(Self { grid, k, values })
    }

    pub(crate) fn from_vec_unchecked(grid: PlaneGrid, k: f64, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, k, values }
    }

    pub fn zeros(grid: PlaneGrid, k: f64) -> Self {
        Self { grid, k, values: vec![ZERO; grid.len()] }
    }

    pub fn from_fn(grid: PlaneGrid, k: f64, mut f: impl FnMut([f64; 3]) -> C64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Self { grid, k, values }
    }

    /// The incident wave `exp(i k z)` on the plane.
    pub fn incident(grid: PlaneGrid, k: f64) -> Self {
        let v = C64::from_polar(1.0, k * grid.z);
        Self { grid, k, values: vec![v; grid.len()] }
    }

    pub fn grid(&self) -> &PlaneGrid {
        &self.grid
    }

    pub fn z(&self) -> f64 {
        self.grid.z
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { grid: self.grid, k: self.k, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("plane fields live on different planes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, k: self.k, values })
    }

    /// Discrete L2 norm `sqrt(sum |f|^2 dx dy)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx * self.grid.dy).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
