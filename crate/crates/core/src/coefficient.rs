//! The dielectric coefficient `c(x) = 1 + beta(x)` and its cutoff function.

use crate::error::{Error, Result};
use crate::field::{RealField3, ScalarField3, C64};
use crate::grid::{Aabb, Grid3};
use serde::{Deserialize, Serialize};

/// A box-shaped inclusion with constant coefficient value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub region: Aabb,
    pub value: f64,
}

impl Inclusion {
    pub fn new(region: Aabb, value: f64) -> Self {
        Self { region, value }
    }
}

/// Width of the cutoff ramp between the inner region and the domain boundary.
pub const CUTOFF_RAMP_CELLS: f64 = 3.0;

/// Real coefficient `c >= 1` together with the cutoff `chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    c: RealField3,
    chi: RealField3,
    inner: Aabb,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Tensor-product cubic ramp: 1 on `inner`, 0 on and outside the grid faces.
pub fn cutoff(grid: &Grid3, inner: &Aabb) -> Result<RealField3> {
    let outer = grid.bounding_box();
    for a in 0..3 {
        if !(inner.min[a] > outer.min[a] && inner.max[a] < outer.max[a]) {
            return Err(Error::invalid(format!(
                "inner region {inner:?} must lie strictly inside the domain {outer:?}"
            )));
        }
    }
    Ok(RealField3::from_fn(*grid, |x| {
        (0..3)
            .map(|a| {
                if x[a] < inner.min[a] {
                    smoothstep((x[a] - outer.min[a]) / (inner.min[a] - outer.min[a]))
                } else if x[a] > inner.max[a] {
                    smoothstep((outer.max[a] - x[a]) / (outer.max[a] - inner.max[a]))
                } else {
                    1.0
                }
            })
            .product()
    }))
}

/// The default inner region: the domain shrunk by the cutoff ramp width.
pub fn default_inner_region(grid: &Grid3) -> Aabb {
    let h = grid.spacing.iter().copied().fold(0.0, f64::max);
    grid.bounding_box().shrink(CUTOFF_RAMP_CELLS * h)
}

impl CoefficientField {
    /// Validate an existing coefficient against the cutoff built for `inner`.
    pub fn from_values(c: RealField3, inner: Aabb) -> Result<Self> {
        let chi = cutoff(c.grid(), &inner)?;
        let grid = *c.grid();
        for (idx, &v) in c.values().iter().enumerate() {
            if !(v >= 1.0) {
                return Err(Error::invalid(format!("coefficient {v} < 1 at node {:?}", grid.ijk(idx))));
            }
            if v != 1.0 && !inner.contains_closed(grid.node_at(idx)) {
                return Err(Error::invalid(format!(
                    "contrast outside the inner region at node {:?}",
                    grid.ijk(idx)
                )));
            }
        }
        Ok(Self { c, chi, inner })
    }

    /// Homogeneous medium `c = 1`.
    pub fn homogeneous(grid: Grid3) -> Result<Self> {
        let inner = default_inner_region(&grid);
        Self::from_values(RealField3::constant(grid, 1.0), inner)
    }

    pub fn grid(&self) -> &Grid3 {
        self.c.grid()
    }

    pub fn c(&self) -> &RealField3 {
        &self.c
    }

    pub fn chi(&self) -> &RealField3 {
        &self.chi
    }

    pub fn inner_region(&self) -> &Aabb {
        &self.inner
    }

    /// `chi * (c - 1)`, the contrast the integral operator acts on.
    pub fn beta_hat(&self) -> ScalarField3 {
        let values = self
            .c
            .values()
            .iter()
            .zip(self.chi.values())
            .map(|(&c, &chi)| C64::new(chi * (c - 1.0), 0.0))
            .collect();
        ScalarField3::from_vec_unchecked(*self.grid(), values)
    }

    pub fn max(&self) -> f64 {
        self.c.max()
    }
}

/// Rasterise box inclusions on `grid`. A node belongs to a box iff it lies in
/// the open box; later inclusions overwrite earlier ones where they overlap.
pub fn build_coefficient(inclusions: &[Inclusion], grid: &Grid3, inner_region: &Aabb) -> Result<CoefficientField> {
    for inc in inclusions {
        if !(inc.value >= 1.0) {
            return Err(Error::invalid(format!("inclusion value {} < 1", inc.value)));
        }
        if !inner_region.contains_box(&inc.region) {
            return Err(Error::invalid(format!(
                "inclusion {:?} is not inside the inner region {inner_region:?}",
                inc.region
            )));
        }
    }
    let c = RealField3::from_fn(*grid, |x| {
        inclusions
            .iter()
            .rev()
            .find(|inc| inc.region.contains_open(x))
            .map_or(1.0, |inc| inc.value)
    });
    CoefficientField::from_values(c, *inner_region)
}
