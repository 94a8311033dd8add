//! Coupling terms `f(x, m)` (local) and `f[m]` (nonlocal).
//!
//! The local reference family is `f(x, m) = c·m^{q-1} + V(x)`; `c > 0` models
//! congestion (increasing in `m`), `c < 0` aggregation. An optional
//! saturation level `M` replaces `m` by `min(m, M)` and makes the coupling
//! bounded.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::field::SpectralField;
use crate::grid::PeriodicGrid;
use crate::spectral::{self, SpectralError};

/// Densities above `-NEGATIVE_CLAMP` are clamped to zero before fractional
/// powers are taken.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("growth exponent q must exceed 1, got {0}")]
    Exponent(f64),
    #[error("density is negative ({value:e}) at grid index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone)]
pub struct LocalCoupling {
    c: f64,
    q: f64,
    bound_k: f64,
    potential: Option<SpectralField>,
    monotone_increasing: bool,
    saturation: Option<f64>,
}

impl LocalCoupling {
    /// `f(x, m) = c·m^{q-1}`, declared monotone when `c ≥ 0`.
    pub fn new(c: f64, q: f64) -> Result<Self, CouplingError> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(CouplingError::Exponent(q));
        }
        if !c.is_finite() {
            return Err(CouplingError::InvalidParameter(format!("amplitude must be finite, got {c}")));
        }
        Ok(Self {
            c,
            q,
            bound_k: 0.0,
            potential: None,
            monotone_increasing: c >= 0.0,
            saturation: None,
        })
    }

    pub fn with_potential(mut self, potential: SpectralField) -> Result<Self, CouplingError> {
        potential.ensure_finite()?;
        self.bound_k = self.bound_k.max(potential.sup_norm());
        self.potential = Some(potential);
        Ok(self)
    }

    pub fn with_bound(mut self, bound_k: f64) -> Self {
        self.bound_k = bound_k.max(0.0);
        self
    }

    pub fn with_saturation(mut self, level: f64) -> Result<Self, CouplingError> {
        if !(level > 0.0) || !level.is_finite() {
            return Err(CouplingError::InvalidParameter(format!(
                "saturation level must be positive, got {level}"
            )));
        }
        self.saturation = Some(level);
        Ok(self)
    }

    pub fn declare_monotone(mut self, increasing: bool) -> Self {
        self.monotone_increasing = increasing;
        self
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn bound_k(&self) -> f64 {
        self.bound_k
    }

    pub fn potential(&self) -> Option<&SpectralField> {
        self.potential.as_ref()
    }

    pub fn monotone_increasing(&self) -> bool {
        self.monotone_increasing
    }

    pub fn saturation(&self) -> Option<f64> {
        self.saturation
    }

    pub fn is_bounded(&self) -> bool {
        self.saturation.is_some() || self.c == 0.0
    }

    pub fn potential_at(&self, index: usize) -> f64 {
        self.potential.as_ref().map_or(0.0, |v| v.values()[index])
    }

    /// Whether the coupling does not depend on `x`.
    pub fn is_homogeneous(&self) -> bool {
        self.potential.as_ref().is_none_or(|v| {
            let first = v.values()[0];
            v.values().iter().all(|&x| x == first)
        })
    }

    fn density_part(&self, m: f64) -> f64 {
        let m = match self.saturation {
            Some(level) => m.min(level),
            None => m,
        };
        if self.q == 2.0 {
            self.c * m
        } else {
            self.c * m.powf(self.q - 1.0)
        }
    }

    /// `f(x_i, m)` at grid index `i` for a scalar density `m ≥ 0`.
    pub fn value(&self, index: usize, m: f64) -> f64 {
        self.density_part(m) + self.potential_at(index)
    }

    /// `F(x_i, m) = ∫_0^m f(x_i, n) dn`.
    pub fn primitive(&self, index: usize, m: f64) -> f64 {
        let v = self.potential_at(index);
        let power = |x: f64| self.c * x.powf(self.q) / self.q;
        let part = match self.saturation {
            Some(level) if m > level => power(level) + self.density_part(level) * (m - level),
            _ => power(m),
        };
        part + v * m
    }

    /// `∂f/∂m` away from zero; used by Newton-type solvers.
    pub fn density_derivative(&self, m: f64) -> f64 {
        if let Some(level) = self.saturation {
            if m > level {
                return 0.0;
            }
        }
        if self.q == 2.0 {
            self.c
        } else {
            self.c * (self.q - 1.0) * m.powf(self.q - 2.0)
        }
    }

    /// `sup |f(x, r)|` over `r ∈ [lo, hi]`.
    pub fn sup_abs(&self, lo: f64, hi: f64) -> f64 {
        let a = self.density_part(lo.max(0.0)).abs();
        let b = self.density_part(hi.max(0.0)).abs();
        let v = self.potential.as_ref().map_or(0.0, |p| p.sup_norm());
        a.max(b) + v
    }

    fn check_grid(&self, m: &SpectralField) -> Result<(), CouplingError> {
        if let Some(v) = &self.potential {
            m.ensure_same_grid(v)?;
        }
        Ok(())
    }

    /// Pointwise `f(x, m(x))`.
    pub fn eval_local(&self, m: &SpectralField) -> Result<SpectralField, CouplingError> {
        self.check_grid(m)?;
        let clamped = clamp_density(m)?;
        Ok(clamped.map_indexed(|i, mi| self.value(i, mi)))
    }

    /// `χ_ε ⋆ f(·, χ_ε ⋆ m)`.
    pub fn mollified_coupling(&self, m: &SpectralField, eps: f64) -> Result<SpectralField, CouplingError> {
        self.check_grid(m)?;
        let smoothed = spectral::mollify(m, eps)?;
        let inner = self.eval_local(&smoothed)?;
        Ok(spectral::mollify(&inner, eps)?)
    }

    /// `∫ F(x, m(x)) dx` by grid quadrature.
    pub fn integrated_primitive(&self, m: &SpectralField) -> Result<f64, CouplingError> {
        let clamped = clamp_density(m)?;
        let total: f64 = clamped
            .values()
            .iter()
            .enumerate()
            .map(|(i, &mi)| self.primitive(i, mi))
            .sum();
        Ok(total / clamped.values().len() as f64)
    }
}

/// Replaces tiny negative ringing by zero; rejects anything below
/// `-NEGATIVE_CLAMP`.
pub fn clamp_density(m: &SpectralField) -> Result<SpectralField, CouplingError> {
    m.ensure_finite()?;
    if let Some((index, &value)) = m
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| v < -NEGATIVE_CLAMP)
    {
        return Err(CouplingError::NegativeDensity { index, value });
    }
    if m.min() >= 0.0 {
        return Ok(m.clone());
    }
    Ok(m.map(|v| v.max(0.0)))
}

/// Outer map `g(r)` of a nonlocal coupling, Lipschitz in `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OuterMap {
    /// `g(r) = slope·r + offset`.
    Affine { slope: f64, offset: f64 },
    /// `g(r) = amplitude·tanh(r/scale)`.
    Saturating { amplitude: f64, scale: f64 },
}

impl OuterMap {
    pub fn apply(&self, r: f64) -> f64 {
        match *self {
            Self::Affine { slope, offset } => slope * r + offset,
            Self::Saturating { amplitude, scale } => amplitude * (r / scale).tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::Affine { slope, .. } => slope.abs(),
            Self::Saturating { amplitude, scale } => (amplitude / scale).abs(),
        }
    }

    fn is_increasing(&self) -> bool {
        match *self {
            Self::Affine { slope, .. } => slope > 0.0,
            Self::Saturating { amplitude, scale } => amplitude * scale > 0.0,
        }
    }
}

/// `f[m](x) = V(x) + g(K ⋆ m(x))`.
#[derive(Debug, Clone)]
pub struct NonlocalCoupling {
    kernel: SpectralField,
    outer: OuterMap,
    potential: Option<SpectralField>,
}

impl NonlocalCoupling {
    pub fn new(kernel: SpectralField, outer: OuterMap) -> Result<Self, CouplingError> {
        kernel.ensure_finite()?;
        if let OuterMap::Saturating { scale, .. } = outer {
            if !(scale > 0.0) {
                return Err(CouplingError::InvalidParameter(format!(
                    "saturating scale must be positive, got {scale}"
                )));
            }
        }
        // warm the transform cache once
        let _ = kernel.coeffs();
        Ok(Self {
            kernel,
            outer,
            potential: None,
        })
    }

    pub fn with_potential(mut self, potential: SpectralField) -> Result<Self, CouplingError> {
        potential.ensure_same_grid(&self.kernel)?;
        potential.ensure_finite()?;
        self.potential = Some(potential);
        Ok(self)
    }

    /// Unit-mass periodized Gaussian of width `eps`.
    pub fn gaussian_kernel(grid: &PeriodicGrid, eps: f64) -> Result<SpectralField, CouplingError> {
        if !(eps > 0.0) {
            return Err(CouplingError::InvalidParameter(format!(
                "kernel width must be positive, got {eps}"
            )));
        }
        let coeffs = (0..grid.len())
            .map(|i| Complex64::new(spectral::mollifier_symbol(grid.frequency(i), eps), 0.0))
            .collect();
        Ok(SpectralField::from_coeffs(grid, coeffs))
    }

    pub fn kernel(&self) -> &SpectralField {
        &self.kernel
    }

    pub fn outer(&self) -> OuterMap {
        self.outer
    }

    pub fn potential(&self) -> Option<&SpectralField> {
        self.potential.as_ref()
    }

    pub fn eval_nonlocal(&self, m: &SpectralField) -> Result<SpectralField, CouplingError> {
        m.ensure_same_grid(&self.kernel)?;
        m.ensure_finite()?;
        let smoothed = spectral::convolve(&self.kernel, m);
        let potential = self.potential.as_ref();
        Ok(smoothed.map_indexed(|i, r| {
            self.outer.apply(r) + potential.map_or(0.0, |v| v.values()[i])
        }))
    }

    /// Bounds on `sup|f[m]|` and `sup|∇f[m]|` valid for every nonnegative
    /// unit-mass `m`.
    pub fn a_priori_bounds(&self) -> (f64, f64) {
        let lip = self.outer.lipschitz();
        let k_sup = self.kernel.sup_norm();
        let grad_k = spectral::gradient(&self.kernel).sup_norm();
        let (v_sup, grad_v) = self
            .potential
            .as_ref()
            .map_or((0.0, 0.0), |v| (v.sup_norm(), spectral::gradient(v).sup_norm()));
        let g0 = self.outer.apply(0.0).abs();
        (v_sup + g0 + lip * k_sup, grad_v + lip * grad_k)
    }

    /// Strict monotonicity of `m ↦ f[m]` in the `L^2` pairing: increasing
    /// affine outer map and a kernel with nonnegative real spectrum.
    pub fn is_monotone(&self) -> bool {
        matches!(self.outer, OuterMap::Affine { .. })
            && self.outer.is_increasing()
            && self
                .kernel
                .coeffs()
                .iter()
                .all(|c| c.re >= -1e-14 && c.im.abs() <= 1e-12)
    }
}

#[derive(Debug, Clone)]
pub enum Coupling {
    Local(LocalCoupling),
    Nonlocal(NonlocalCoupling),
}

impl Coupling {
    /// `f(·, m)` or `f[m]`.
    pub fn eval(&self, m: &SpectralField) -> Result<SpectralField, CouplingError> {
        match self {
            Self::Local(c) => c.eval_local(m),
            Self::Nonlocal(c) => c.eval_nonlocal(m),
        }
    }

    /// Evaluation used inside the fixed point: local couplings are mollified
    /// when `eps > 0`.
    pub fn eval_regularized(&self, m: &SpectralField, eps: f64) -> Result<SpectralField, CouplingError> {
        match self {
            Self::Local(c) if eps > 0.0 => c.mollified_coupling(m, eps),
            _ => self.eval(m),
        }
    }

    pub fn is_monotone(&self) -> bool {
        match self {
            Self::Local(c) => c.monotone_increasing(),
            Self::Nonlocal(c) => c.is_monotone(),
        }
    }

    pub fn as_local(&self) -> Option<&LocalCoupling> {
        match self {
            Self::Local(c) => Some(c),
            Self::Nonlocal(_) => None,
        }
    }
}
