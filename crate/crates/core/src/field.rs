//! Complex and real fields sampled on a [`Grid3`].

use crate::error::{Error, Result};
use crate::grid::Grid3;
use num_complex::Complex64;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check_finite_c(values: &[C64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// A complex scalar per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3 {
    grid: Grid3,
    values: Vec<C64>,
}

impl ScalarField3 {
    /// Checked constructor: count and finiteness are validated.
    pub fn new(grid: Grid3, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "scalar field has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        check_finite_c(&values, "scalar field")?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid3, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, ZERO)
    }

    pub fn constant(grid: Grid3, value: C64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: Grid3, mut f: impl FnMut([f64; 3]) -> C64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.node_at(idx))).collect();
        Self { grid, values }
    }

    /// The incident plane wave `exp(i k x3)`.
    pub fn plane_wave(grid: Grid3, k: f64) -> Self {
        Self::from_fn(grid, |x| C64::from_polar(1.0, k * x[2]))
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
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

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> C64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn is_finite(&self) -> bool {
        check_finite_c(&self.values, "scalar field").is_ok()
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.grid.ensure_matches(&other.grid, "zip_map")?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v * s)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: C64, other: &Self) -> Result<()> {
        self.grid.ensure_matches(&other.grid, "axpy")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn real_part(&self) -> RealField3 {
        RealField3 { grid: self.grid, values: self.values.iter().map(|v| v.re).collect() }
    }
}

/// A complex 3-vector per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    grid: Grid3,
    values: Vec<[C64; 3]>,
}

impl VectorField3 {
    pub fn new(grid: Grid3, values: Vec<[C64; 3]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "vector field has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values
            .iter()
            .position(|v| v.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())))
        {
            return Err(Error::NonFinite { what: "vector field", index });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid3, values: Vec<[C64; 3]>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, [ZERO; 3])
    }

    pub fn constant(grid: Grid3, value: [C64; 3]) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid3, mut f: impl FnMut([f64; 3]) -> [C64; 3]) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.node_at(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[[C64; 3]] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [[C64; 3]] {
        &mut self.values
    }

    pub fn component(&self, axis: usize) -> ScalarField3 {
        ScalarField3 { grid: self.grid, values: self.values.iter().map(|v| v[axis]).collect() }
    }

    pub fn from_components(c: [&ScalarField3; 3]) -> Result<Self> {
        c[0].grid.ensure_matches(&c[1].grid, "vector components")?;
        c[0].grid.ensure_matches(&c[2].grid, "vector components")?;
        let values = (0..c[0].values.len())
            .map(|n| [c[0].values[n], c[1].values[n], c[2].values[n]])
            .collect();
        Ok(Self { grid: c[0].grid, values })
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn([C64; 3], [C64; 3]) -> [C64; 3]) -> Result<Self> {
        self.grid.ensure_matches(&other.grid, "vector zip_map")?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| [a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.map(|c| c * s)).collect() }
    }

    /// Pointwise bilinear product `a . b` (no conjugation).
    pub fn dot(&self, other: &Self) -> Result<ScalarField3> {
        self.grid.ensure_matches(&other.grid, "dot")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
            .collect();
        Ok(ScalarField3 { grid: self.grid, values })
    }

    /// Largest Euclidean norm over all nodes.
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// A real scalar per grid node (coefficients, cutoffs).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField3 {
    grid: Grid3,
    values: Vec<f64>,
}

impl RealField3 {
    pub fn new(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "real field has {} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "real field", index });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid3, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid3, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.node_at(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn to_complex(&self) -> ScalarField3 {
        ScalarField3 { grid: self.grid, values: self.values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
