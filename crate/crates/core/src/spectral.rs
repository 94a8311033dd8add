//! Fourier multipliers on the torus: fractional and classical derivatives,
//! Poisson solves, mollification and Bessel potential norms.
//!
//! A mode with integer wavenumber `k` carries the plane wave `exp(2πi k·x)`,
//! so `(-Δ)^s` acts as the multiplier `(2π|k|)^{2s}`. Derivative multipliers
//! vanish on the unmatched Nyquist mode `-n/2`.

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{SpectralField, VectorField};
use crate::grid::PeriodicGrid;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("non-finite value {value} at grid index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{0}")]
    InvalidParameter(String),
}

/// Applies a real or complex multiplier indexed by flat grid position.
pub fn apply_multiplier(
    field: &SpectralField,
    multiplier: impl Fn(usize) -> Complex64,
) -> SpectralField {
    let grid = field.grid();
    let coeffs = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * multiplier(i))
        .collect();
    SpectralField::from_coeffs(grid, coeffs)
}

fn check_order(s: f64) -> Result<(), SpectralError> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "fractional order must lie in (0, 1], got {s}"
        )));
    }
    Ok(())
}

/// Multiplier `(2π|k|)^{2s}` with the Nyquist mode zeroed.
pub fn fractional_symbol(grid: &PeriodicGrid, flat: usize, s: f64) -> f64 {
    if flat == 0 || grid.is_nyquist(flat) {
        0.0
    } else if s == 1.0 {
        grid.frequency(flat).powi(2)
    } else {
        grid.frequency(flat).powf(2.0 * s)
    }
}

/// `(-Δ)^s` on the torus.
pub fn fractional_laplacian(field: &SpectralField, s: f64) -> Result<SpectralField, SpectralError> {
    check_order(s)?;
    field.ensure_finite()?;
    Ok(fractional_laplacian_unchecked(field, s))
}

pub(crate) fn fractional_laplacian_unchecked(field: &SpectralField, s: f64) -> SpectralField {
    let grid = field.grid().clone();
    apply_multiplier(field, |i| Complex64::new(fractional_symbol(&grid, i, s), 0.0))
}

/// Mean-zero inverse of `(-Δ)^s`: the zero and Nyquist modes are mapped to 0.
pub fn inverse_fractional_laplacian(field: &SpectralField, s: f64) -> SpectralField {
    let grid = field.grid().clone();
    apply_multiplier(field, |i| {
        if i == 0 || grid.is_nyquist(i) {
            Complex64::default()
        } else {
            Complex64::new(grid.frequency(i).powf(-2.0 * s), 0.0)
        }
    })
}

/// Spectral partial derivative along `axis`.
pub fn partial(field: &SpectralField, axis: usize) -> SpectralField {
    let grid = field.grid().clone();
    apply_multiplier(field, |i| {
        if grid.is_nyquist(i) {
            Complex64::default()
        } else {
            Complex64::new(0.0, 2.0 * std::f64::consts::PI * grid.mode(i)[axis] as f64)
        }
    })
}

pub fn gradient(field: &SpectralField) -> VectorField {
    let comps = (0..field.grid().dim()).map(|d| partial(field, d)).collect();
    VectorField::new(comps).expect("components share the input grid")
}

pub fn divergence(vf: &VectorField) -> SpectralField {
    let grid = vf.grid().clone();
    let mut acc = vec![Complex64::default(); grid.len()];
    for (axis, comp) in vf.components().iter().enumerate() {
        for (i, (a, c)) in acc.iter_mut().zip(comp.coeffs()).enumerate() {
            if !grid.is_nyquist(i) {
                *a += c * Complex64::new(0.0, 2.0 * std::f64::consts::PI * grid.mode(i)[axis] as f64);
            }
        }
    }
    SpectralField::from_coeffs(&grid, acc)
}

/// Mean-zero `u` with `-Δu = div(w)`.
pub fn solve_poisson_div(w: &VectorField) -> Result<SpectralField, SpectralError> {
    w.ensure_finite()?;
    let grid = w.grid().clone();
    let div = divergence(w);
    Ok(apply_multiplier(&div, |i| {
        if i == 0 || grid.is_nyquist(i) {
            Complex64::default()
        } else {
            Complex64::new(1.0 / grid.frequency(i).powi(2), 0.0)
        }
    }))
}

/// Convolution with the periodized Gaussian of width `eps`.
pub fn mollify(field: &SpectralField, eps: f64) -> Result<SpectralField, SpectralError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(SpectralError::InvalidParameter(format!(
            "mollifier width must be positive, got {eps}"
        )));
    }
    let grid = field.grid().clone();
    Ok(apply_multiplier(field, |i| {
        Complex64::new(mollifier_symbol(grid.frequency(i), eps), 0.0)
    }))
}

/// Fourier multiplier of the Gaussian mollifier at frequency `2π|k|`.
pub fn mollifier_symbol(frequency: f64, eps: f64) -> f64 {
    (-0.5 * eps * eps * frequency * frequency).exp()
}

/// Periodic convolution `(a ⋆ b)(x) = ∫ a(x-y) b(y) dy`.
pub fn convolve(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let coeffs = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x * y).collect();
    SpectralField::from_coeffs(a.grid(), coeffs)
}

/// `‖(I - Δ)^{σ/2} f‖_{L^p}`.
pub fn bessel_norm(field: &SpectralField, sigma: f64, p: f64) -> Result<f64, SpectralError> {
    if !(p > 1.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "Bessel norm needs p > 1, got {p}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "Bessel order must be nonnegative, got {sigma}"
        )));
    }
    field.ensure_finite()?;
    if sigma == 0.0 {
        return Ok(field.lp_norm(p));
    }
    let grid = field.grid().clone();
    let lifted = apply_multiplier(field, |i| {
        Complex64::new((1.0 + grid.frequency(i).powi(2)).powf(0.5 * sigma), 0.0)
    });
    Ok(lifted.lp_norm(p))
}

/// 2/3-rule truncation: drops every mode with some `|k_i| > n/3`.
pub fn dealias(field: &SpectralField) -> SpectralField {
    let grid = field.grid().clone();
    apply_multiplier(field, |i| {
        if grid.is_resolved_for_products(i) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    })
}

/// Pointwise nonlinear result, optionally truncated by the 2/3 rule.
pub fn filtered(field: SpectralField, enabled: bool) -> SpectralField {
    if enabled {
        dealias(&field)
    } else {
        field
    }
}
