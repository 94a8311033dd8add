//! Stationary fractional Fokker–Planck equations
//! `(-Δ)^s m + div(b m) = 0`, `∫ m = 1`.
//!
//! Every iterate is produced by [`solve_div_source`], which sets the zero mode
//! to exactly 1, so mass is conserved by construction rather than by
//! projection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{SpectralField, VectorField};
use crate::iterative::{gmres, AndersonMixer};
use crate::spectral::{self, SpectralError};

#[derive(Debug, Error)]
pub enum FpError {
    #[error("fractional order must lie in (1/2, 1], got {0}")]
    Order(f64),
    #[error(
        "stationary Fokker-Planck iteration did not converge in {iterations} iterations \
         (last residual {last:e})",
        last = history.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence { iterations: usize, history: Vec<f64> },
    #[error("density minimum {min:e} is below -pos_tol (residual {residual:e}); the grid is likely under-resolved")]
    NegativeDensity { min: f64, residual: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpConfig {
    /// Residual target, scaled by `1 + ‖b‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub pos_tol: f64,
    pub damping: f64,
    pub anderson_depth: usize,
    pub dealias: bool,
}

impl Default for FpConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            pos_tol: 1e-8,
            damping: 0.5,
            anderson_depth: 5,
            dealias: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FpSolution {
    pub m: SpectralField,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub min_m: f64,
    pub max_m: f64,
}

fn check_order(s: f64) -> Result<(), FpError> {
    if !(s > 0.5 && s <= 1.0) {
        return Err(FpError::Order(s));
    }
    Ok(())
}

/// `m = 1 + (-Δ)^{1-s} u` with `-Δu = div(w)`, so that `(-Δ)^s m = div(w)`
/// and the zero mode of `m` is exactly 1.
pub fn solve_div_source(w: &VectorField, s: f64) -> Result<SpectralField, FpError> {
    check_order(s)?;
    w.ensure_finite()?;
    Ok(div_source_unchecked(w, s))
}

fn div_source_unchecked(w: &VectorField, s: f64) -> SpectralField {
    let grid = w.grid().clone();
    let div = spectral::divergence(w);
    let mut coeffs: Vec<Complex64> = div
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 || grid.is_nyquist(i) {
                Complex64::default()
            } else {
                c / spectral::fractional_symbol(&grid, i, s)
            }
        })
        .collect();
    coeffs[0] = Complex64::new(1.0, 0.0);
    SpectralField::from_coeffs(&grid, coeffs)
}

/// Product `b·m` per component, 2/3-truncated when `dealias` is set.
pub fn flux(b: &VectorField, m: &SpectralField, dealias: bool) -> VectorField {
    b.map_components(|c| spectral::filtered(c.mul(m), dealias))
}

/// `‖(-Δ)^s m + div(b m)‖∞` with the dealiased product.
pub fn fp_residual(m: &SpectralField, b: &VectorField, s: f64) -> f64 {
    fp_residual_with(m, b, s, true)
}

pub fn fp_residual_with(m: &SpectralField, b: &VectorField, s: f64, dealias: bool) -> f64 {
    let lhs = spectral::fractional_laplacian_unchecked(m, s);
    let div = spectral::divergence(&flux(b, m, dealias));
    lhs.add(&div).sup_norm()
}

pub fn solve_stationary_fp(b: &VectorField, s: f64, cfg: &FpConfig) -> Result<FpSolution, FpError> {
    solve_stationary_fp_from(b, s, cfg, None)
}

/// Damped Picard with Anderson mixing on `m ↦ solve_div_source(-b m)`,
/// started from `initial` (default `m ≡ 1`).
pub fn solve_stationary_fp_from(
    b: &VectorField,
    s: f64,
    cfg: &FpConfig,
    initial: Option<&SpectralField>,
) -> Result<FpSolution, FpError> {
    check_order(s)?;
    b.ensure_finite()?;
    let grid = b.grid().clone();
    let target = cfg.tol * (1.0 + b.sup_norm());
    let map = |m: &SpectralField| div_source_unchecked(&flux(b, m, cfg.dealias).scale(-1.0), s);

    let mut m = match initial {
        Some(m0) => {
            m0.ensure_same_grid(&SpectralField::zeros(&grid))?;
            m0.clone()
        }
        None => SpectralField::constant(&grid, 1.0),
    };
    let mut mixer = AndersonMixer::new(cfg.anderson_depth, cfg.damping);
    let mut history = Vec::new();
    for iter in 1..=cfg.max_iter {
        let image = map(&m);
        let residual = fp_residual_with(&image, b, s, cfg.dealias);
        history.push(residual);
        if residual <= target {
            let min_m = image.min();
            if min_m < -cfg.pos_tol {
                return Err(FpError::NegativeDensity { min: min_m, residual });
            }
            return Ok(FpSolution {
                min_m,
                max_m: image.max(),
                m: image,
                iterations: iter,
                residual,
                residual_history: history,
            });
        }
        if !residual.is_finite() {
            break;
        }
        let next = mixer.step(m.values(), image.values());
        m = SpectralField::new(&grid, next)?;
    }
    // Strong drifts at small s make the map expansive on low modes; the
    // problem is linear, so fall back to GMRES on (I - K) m = 1.
    let apply = |x: &[f64]| {
        let xf = SpectralField::new(&grid, x.to_vec()).expect("finite iterate");
        let k = map(&xf);
        x.iter().zip(k.values()).map(|(a, b)| a - (b - 1.0)).collect::<Vec<f64>>()
    };
    let ones = vec![1.0; grid.len()];
    let mut x = ones.clone();
    let mut budget = cfg.max_iter;
    while budget > 0 {
        let ax = apply(&x);
        let r: Vec<f64> = ones.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let out = gmres(&apply, |y: &[f64]| y.to_vec(), &r, 1e-13, 60, budget);
        budget = budget.saturating_sub(out.iterations.max(1));
        x.iter_mut().zip(&out.x).for_each(|(a, d)| *a += d);
        let Ok(candidate) = SpectralField::new(&grid, x.clone()) else {
            break;
        };
        let image = map(&candidate);
        let residual = fp_residual_with(&image, b, s, cfg.dealias);
        history.push(residual);
        if residual <= target {
            let min_m = image.min();
            if min_m < -cfg.pos_tol {
                return Err(FpError::NegativeDensity { min: min_m, residual });
            }
            return Ok(FpSolution {
                min_m,
                max_m: image.max(),
                m: image,
                iterations: history.len(),
                residual,
                residual_history: history,
            });
        }
    }
    Err(FpError::NonConvergence {
        iterations: history.len(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::PI;

    #[test]
    fn zero_source_gives_uniform_density() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let m = solve_div_source(&VectorField::zeros(&g), 0.7).unwrap();
        assert_eq!(m.coeffs()[0].re, 1.0);
        assert!(m.max_abs_diff(&SpectralField::constant(&g, 1.0)) < 1e-15);
    }

    #[test]
    fn single_mode_source() {
        // w = (cos 2πx, 0): div w = -2π sin 2πx, so m = 1 - (2π)^{1-2s} sin 2πx
        let g = PeriodicGrid::new(2, 32).unwrap();
        let s = 0.8;
        let w = VectorField::from_fn(&g, |x| [(2.0 * PI * x[0]).cos(), 0.0, 0.0]);
        let m = solve_div_source(&w, s).unwrap();
        let expect = SpectralField::from_fn(&g, |x| 1.0 - (2.0 * PI).powf(1.0 - 2.0 * s) * (2.0 * PI * x[0]).sin());
        assert!(m.max_abs_diff(&expect) < 1e-14);
        let lhs = spectral::fractional_laplacian(&m, s).unwrap();
        let rhs = spectral::divergence(&w);
        assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * w.sup_norm());
    }

    #[test]
    fn rejects_subcritical_order() {
        let g = PeriodicGrid::new(1, 16).unwrap();
        assert!(matches!(solve_div_source(&VectorField::zeros(&g), 0.4), Err(FpError::Order(_))));
        assert!(solve_stationary_fp(&VectorField::zeros(&g), 0.5, &FpConfig::default()).is_err());
    }

    #[test]
    fn zero_drift_converges_in_one_iteration() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let sol = solve_stationary_fp(&VectorField::zeros(&g), 0.75, &FpConfig::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.residual, 0.0);
        assert_eq!(sol.m.coeffs()[0].re, 1.0);
    }

    #[test]
    fn constant_drift_keeps_uniform_density() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let b = VectorField::from_fn(&g, |_| [1.5, -0.7, 0.0]);
        let sol = solve_stationary_fp(&b, 0.6, &FpConfig::default()).unwrap();
        assert!(sol.m.max_abs_diff(&SpectralField::constant(&g, 1.0)) < 1e-12);
    }

    #[test]
    fn residual_of_uniform_density_without_drift() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        assert!(fp_residual(&SpectralField::constant(&g, 1.0), &VectorField::zeros(&g), 0.75) < 1e-14);
    }

    #[test]
    fn perturbed_solution_has_large_residual() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let s = 0.7;
        let cfg = FpConfig::default();
        let b = VectorField::zeros(&g);
        let sol = solve_stationary_fp(&b, s, &cfg).unwrap();
        let bumped = sol.m.add(&SpectralField::from_fn(&g, |x| 0.1 * (2.0 * PI * x[0]).cos()));
        assert!(fp_residual(&bumped, &b, s) >= (2.0 * PI).powf(2.0 * s) * 0.1 - cfg.tol);
    }

    #[test]
    fn converged_solution_meets_postconditions() {
        let g = PeriodicGrid::new(1, 128).unwrap();
        let b = VectorField::from_fn(&g, |x| [1.5 * (2.0 * PI * x[0]).sin() + 0.5 * (4.0 * PI * x[0]).cos(), 0.0, 0.0]);
        let cfg = FpConfig::default();
        let sol = solve_stationary_fp(&b, 0.7, &cfg).unwrap();
        assert_eq!(sol.m.coeffs()[0].re, 1.0);
        assert!(sol.residual <= cfg.tol * (1.0 + b.sup_norm()));
        assert!((fp_residual(&sol.m, &b, 0.7) - sol.residual).abs() < 1e-15);
        assert!(sol.min_m > 0.0);
    }

    #[test]
    fn strong_drift_at_small_order_converges() {
        let g = PeriodicGrid::new(1, 128).unwrap();
        let b = VectorField::from_fn(&g, |x| [2.0 * PI * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
        let cfg = FpConfig::default();
        let sol = solve_stationary_fp(&b, 0.6, &cfg).unwrap();
        assert_eq!(sol.m.coeffs()[0].re, 1.0);
        assert!(fp_residual(&sol.m, &b, 0.6) <= 1e-8);
        assert!(sol.min_m > 0.0);
    }

    #[test]
    fn non_convergence_reports_history() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let b = VectorField::from_fn(&g, |x| [3.0 * (2.0 * PI * x[0]).sin(), 0.0, 0.0]);
        let cfg = FpConfig { max_iter: 3, ..FpConfig::default() };
        match solve_stationary_fp(&b, 0.75, &cfg) {
            Err(FpError::NonConvergence { iterations, history }) => {
                // three mixing steps, then the bounded Krylov fallback
                assert_eq!(iterations, history.len());
                assert!(history.len() > 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
