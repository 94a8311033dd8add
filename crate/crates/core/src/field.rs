//! Grid functions with a lazily cached Fourier representation.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::grid::{PeriodicGrid, MAX_DIM};
use crate::spectral::SpectralError;

/// A real scalar field on a [`PeriodicGrid`].
///
/// Coefficients are normalized so that `coeffs()[0]` is the mean of the
/// field, which on the unit torus is also its integral. The cache is filled
/// on first use and dropped by [`SpectralField::values_mut`].
pub struct SpectralField {
    grid: PeriodicGrid,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl Clone for SpectralField {
    fn clone(&self) -> Self {
        let coeffs = OnceLock::new();
        if let Some(c) = self.coeffs.get() {
            let _ = coeffs.set(c.clone());
        }
        Self {
            grid: self.grid.clone(),
            values: self.values.clone(),
            coeffs,
        }
    }
}

impl std::fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .field("min", &self.min())
            .field("max", &self.max())
            .field("mean", &self.mean())
            .finish()
    }
}

impl SpectralField {
    pub fn new(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            coeffs: OnceLock::new(),
        })
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &PeriodicGrid, c: f64) -> Self {
        let mut coeffs = vec![Complex64::default(); grid.len()];
        coeffs[0] = Complex64::new(c, 0.0);
        let cache = OnceLock::new();
        let _ = cache.set(coeffs);
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
            coeffs: cache,
        }
    }

    /// Samples `f` at the grid coordinates.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..dim])
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
            coeffs: OnceLock::new(),
        }
    }

    /// Builds a field from Fourier coefficients, keeping them as the cache.
    ///
    /// The coefficients must be conjugate symmetric; only the real part of the
    /// inverse transform is kept.
    pub fn from_coeffs(grid: &PeriodicGrid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        let values = grid.inverse(&coeffs);
        let cache = OnceLock::new();
        let _ = cache.set(coeffs);
        Self {
            grid: grid.clone(),
            values,
            coeffs: cache,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the samples; invalidates the coefficient cache.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.coeffs = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| self.grid.forward(&self.values))
    }

    /// Integral over the torus, read from the zero mode.
    pub fn mean(&self) -> f64 {
        self.coeffs()[0].re
    }

    /// Plain grid average of the samples.
    pub fn quadrature_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Discrete `L^p` norm with unit total measure.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let n = self.values.len() as f64;
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / n).powf(1.0 / p)
    }

    /// Discrete `L^2` inner product with unit total measure.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let n = self.values.len() as f64;
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n
    }

    pub fn ensure_finite(&self) -> Result<(), SpectralError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(SpectralError::NonFinite {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn ensure_same_grid(&self, other: &SpectralField) -> Result<(), SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            coeffs: OnceLock::new(),
        }
    }

    /// Pointwise map that also sees the flat index.
    pub fn map_indexed(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().enumerate().map(|(i, &v)| f(i, v)).collect(),
            coeffs: OnceLock::new(),
        }
    }

    pub fn zip_map(&self, other: &SpectralField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid == other.grid);
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            coeffs: OnceLock::new(),
        }
    }

    /// Linear combination `a·self + b·other`, done in both representations
    /// when both caches are warm so the zero mode stays exact.
    pub fn lincomb(&self, a: f64, other: &SpectralField, b: f64) -> Self {
        debug_assert!(self.grid == other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        let coeffs = OnceLock::new();
        if let (Some(cx), Some(cy)) = (self.coeffs.get(), other.coeffs.get()) {
            let _ = coeffs.set(cx.iter().zip(cy).map(|(x, y)| x * a + y * b).collect());
        }
        Self {
            grid: self.grid.clone(),
            values,
            coeffs,
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        let coeffs = OnceLock::new();
        if let Some(c) = self.coeffs.get() {
            let _ = coeffs.set(c.iter().map(|x| x * a).collect());
        }
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
            coeffs,
        }
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        let coeffs = OnceLock::new();
        if let Some(cs) = self.coeffs.get() {
            let mut cs = cs.clone();
            cs[0] += c;
            let _ = coeffs.set(cs);
        }
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
            coeffs,
        }
    }

    pub fn mul(&self, other: &SpectralField) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    /// Same field with the zero mode removed.
    pub fn without_mean(&self) -> Self {
        let mut c = self.coeffs().to_vec();
        c[0] = Complex64::default();
        Self::from_coeffs(&self.grid, c)
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Flat index of the minimum sample.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// `dim` scalar fields sharing one grid.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<SpectralField>,
}

impl VectorField {
    pub fn new(components: Vec<SpectralField>) -> Result<Self, SpectralError> {
        let first = components.first().ok_or_else(|| {
            SpectralError::InvalidParameter("vector field needs at least one component".into())
        })?;
        let grid = first.grid().clone();
        if components.len() != grid.dim() {
            return Err(SpectralError::InvalidParameter(format!(
                "vector field on a {}-dimensional grid needs {} components, got {}",
                grid.dim(),
                grid.dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| *c.grid() != grid) {
            return Err(SpectralError::GridMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| SpectralField::zeros(grid)).collect(),
        }
    }

    /// Builds a field from a pointwise vector function of the coordinates.
    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> [f64; MAX_DIM]) -> Self {
        let dim = grid.dim();
        let samples: Vec<[f64; MAX_DIM]> = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..dim])
            })
            .collect();
        let components = (0..dim)
            .map(|d| {
                SpectralField::new(grid, samples.iter().map(|v| v[d]).collect())
                    .expect("length matches grid")
            })
            .collect();
        Self { components }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SpectralField] {
        &self.components
    }

    pub fn component(&self, d: usize) -> &SpectralField {
        &self.components[d]
    }

    pub fn into_components(self) -> Vec<SpectralField> {
        self.components
    }

    /// Vector at one grid point; unused slots are zero.
    pub fn at(&self, flat: usize) -> [f64; MAX_DIM] {
        let mut v = [0.0; MAX_DIM];
        for (d, c) in self.components.iter().enumerate() {
            v[d] = c.values()[flat];
        }
        v
    }

    pub fn map_components(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self {
            components: self.components.iter().map(f).collect(),
        }
    }

    /// Pointwise `|v(x)|`.
    pub fn magnitude(&self) -> SpectralField {
        let grid = self.grid();
        let values = (0..grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values()[i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        SpectralField::new(grid, values).expect("length matches grid")
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> SpectralField {
        let grid = self.grid();
        let values = (0..grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .zip(&other.components)
                    .map(|(a, b)| a.values()[i] * b.values()[i])
                    .sum()
            })
            .collect();
        SpectralField::new(grid, values).expect("length matches grid")
    }

    /// Sum of discrete inner products of the components.
    pub fn inner(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    /// `sup_x |v(x)|`.
    pub fn sup_norm(&self) -> f64 {
        self.magnitude().sup_norm()
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_components(|c| c.scale(a))
    }

    pub fn lincomb(&self, a: f64, other: &VectorField, b: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(x, y)| x.lincomb(a, y, b))
                .collect(),
        }
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, m: &SpectralField) -> Self {
        self.map_components(|c| c.mul(m))
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        self.sub_magnitude(other).sup_norm()
    }

    fn sub_magnitude(&self, other: &VectorField) -> SpectralField {
        self.lincomb(1.0, other, -1.0).magnitude()
    }

    pub fn ensure_finite(&self) -> Result<(), SpectralError> {
        self.components.iter().try_for_each(|c| c.ensure_finite())
    }
}
