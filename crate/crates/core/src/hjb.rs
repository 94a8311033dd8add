//! Ergodic fractional Hamilton–Jacobi equations
//! `(-Δ)^s u + H(∇u) + λ = f`, with `u` periodic and mean-zero.
//!
//! The solver marches `∂_t v + (-Δ)^s v + H(∇v) = f` with a first-order
//! exponential integrator (the linear part is integrated exactly, mode by
//! mode) until the stationary residual is small, then polishes `(u, λ)` with
//! Newton–GMRES. The data is split as `f = ⟨f⟩ + f̃`; only `f̃` enters the
//! iteration and `λ` is shifted by `⟨f⟩` at the end, so adding a constant to
//! `f` moves `λ` by that constant and leaves `u` alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{SpectralField, VectorField};
use crate::grid::PeriodicGrid;
use crate::hamiltonian::Hamiltonian;
use crate::iterative::gmres;
use crate::spectral::{self, SpectralError};

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("fractional order must lie in (1/2, 1], got {0}")]
    Order(f64),
    #[error(
        "time marching blew up at t = {time} (|grad v| = {grad_norm:e}, dt = {dt:e}); \
         try a smaller time step or a positive smoothing_delta"
    )]
    BlowUp { time: f64, grad_norm: f64, dt: f64 },
    #[error(
        "ergodic solve did not converge (residual {residual:e} after t = {time}, last lambda {last})",
        last = lambda_history.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence {
        time: f64,
        residual: f64,
        lambda_history: Vec<f64>,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HjbConfig {
    /// Target for the sup-norm stationary residual.
    pub tol: f64,
    pub grad_cap: f64,
    pub max_time: f64,
    /// Initial time step; by default `min(0.1, 1/osc f)`.
    pub dt: Option<f64>,
    pub dealias: bool,
    pub newton: bool,
    /// Residual at which marching hands over to Newton.
    pub newton_switch: f64,
    pub max_newton: usize,
}

impl Default for HjbConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            grad_cap: 1e3,
            max_time: 1e4,
            dt: None,
            dealias: true,
            newton: true,
            newton_switch: 1e-4,
            max_newton: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ErgodicSolution {
    pub u: SpectralField,
    pub lambda: f64,
    pub grad_norm: f64,
    pub residual: f64,
    pub steps: usize,
    pub newton_iterations: usize,
    pub final_time: f64,
    pub dt: f64,
    /// `λ_t` after every accepted time step.
    pub lambda_history: Vec<f64>,
}

fn check_order(s: f64) -> Result<(), HjbError> {
    if !(s > 0.5 && s <= 1.0) {
        return Err(HjbError::Order(s));
    }
    Ok(())
}

/// Drops the zero mode and the unmatched Nyquist modes, which no derivative
/// of `u` can balance.
fn fluctuation(f: &SpectralField) -> SpectralField {
    let grid = f.grid().clone();
    spectral::apply_multiplier(f, |i| {
        if i == 0 || grid.is_nyquist(i) {
            Complex64::default()
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

fn hamiltonian_term(u: &SpectralField, h: &Hamiltonian, dealias: bool) -> (SpectralField, VectorField) {
    let grad = spectral::gradient(u);
    (spectral::filtered(h.eval_field(&grad), dealias), grad)
}

/// `(-Δ)^s u + P[H(∇u)] + λ - f`, where `P` is the 2/3 filter when `dealias`.
pub fn hjb_residual_field(
    u: &SpectralField,
    lambda: f64,
    f: &SpectralField,
    h: &Hamiltonian,
    s: f64,
    dealias: bool,
) -> SpectralField {
    let (hu, _) = hamiltonian_term(u, h, dealias);
    spectral::fractional_laplacian_unchecked(u, s)
        .add(&hu)
        .sub(f)
        .add_scalar(lambda)
}

/// `‖(-Δ)^s u + P[H(∇u)] + λ - f‖∞`.
pub fn hjb_residual(u: &SpectralField, lambda: f64, f: &SpectralField, h: &Hamiltonian, s: f64, dealias: bool) -> f64 {
    hjb_residual_field(u, lambda, f, h, s, dealias).sup_norm()
}

/// `(min f - H(0), max f - H(0))`.
pub fn lambda_bounds(f: &SpectralField, h: &Hamiltonian) -> (f64, f64) {
    let h0 = h.eval(&[0.0]);
    (f.min() - h0, f.max() - h0)
}

pub fn solve_ergodic(f: &SpectralField, h: &Hamiltonian, s: f64, cfg: &HjbConfig) -> Result<ErgodicSolution, HjbError> {
    solve_ergodic_from(f, h, s, cfg, None)
}

struct State {
    v: SpectralField,
    lambda: f64,
    residual: f64,
    grad_norm: f64,
}

fn evaluate(v: SpectralField, ft: &SpectralField, h: &Hamiltonian, s: f64, dealias: bool) -> (State, SpectralField) {
    let (hu, grad) = hamiltonian_term(&v, h, dealias);
    let nonlinear = ft.sub(&hu);
    let lambda = nonlinear.mean();
    let residual = spectral::fractional_laplacian_unchecked(&v, s)
        .sub(&nonlinear)
        .add_scalar(lambda)
        .sup_norm();
    let grad_norm = grad.magnitude().sup_norm();
    (
        State {
            v,
            lambda,
            residual,
            grad_norm,
        },
        nonlinear,
    )
}

/// One exponential-Euler step; the result is mean-zero with a zero Nyquist
/// mode.
fn etd_step(grid: &PeriodicGrid, v: &SpectralField, nonlinear: &SpectralField, s: f64, dt: f64) -> SpectralField {
    let coeffs = v
        .coeffs()
        .iter()
        .zip(nonlinear.coeffs())
        .enumerate()
        .map(|(i, (c, nl))| {
            if i == 0 || grid.is_nyquist(i) {
                return Complex64::default();
            }
            let mu = spectral::fractional_symbol(grid, i, s);
            let decay = (-mu * dt).exp();
            // (1 - e^{-μ dt})/μ, written with expm1 to keep low modes accurate
            let weight = -(-mu * dt).exp_m1() / mu;
            c * decay + nl * weight
        })
        .collect();
    SpectralField::from_coeffs(grid, coeffs)
}

/// Ergodic solve started from `initial` (its mean is discarded); `None`
/// starts from `u ≡ 0`.
pub fn solve_ergodic_from(
    f: &SpectralField,
    h: &Hamiltonian,
    s: f64,
    cfg: &HjbConfig,
    initial: Option<&SpectralField>,
) -> Result<ErgodicSolution, HjbError> {
    check_order(s)?;
    f.ensure_finite()?;
    let grid = f.grid().clone();
    let shift = f.mean();
    let ft = fluctuation(f);
    let v0 = match initial {
        Some(u0) => {
            u0.ensure_same_grid(f)?;
            u0.ensure_finite()?;
            fluctuation(u0)
        }
        None => SpectralField::zeros(&grid),
    };

    let osc = ft.max() - ft.min();
    let mut dt = cfg.dt.unwrap_or(if osc > 0.0 { (1.0 / osc).min(0.1) } else { 0.1 });
    if !(dt > 0.0) {
        return Err(SpectralError::InvalidParameter(format!("time step must be positive, got {dt}")).into());
    }
    let march_target = if cfg.newton { cfg.newton_switch.max(cfg.tol) } else { cfg.tol };

    let (mut state, mut nonlinear) = evaluate(v0, &ft, h, s, cfg.dealias);
    let mut time = 0.0;
    let mut steps = 0;
    let mut history = Vec::new();
    while state.residual > march_target {
        if time >= cfg.max_time {
            return Err(HjbError::NonConvergence {
                time,
                residual: state.residual,
                lambda_history: history,
            });
        }
        let candidate = etd_step(&grid, &state.v, &nonlinear, s, dt);
        let (next, next_nl) = evaluate(candidate, &ft, h, s, cfg.dealias);
        let blown = !next.residual.is_finite() || next.grad_norm > cfg.grad_cap;
        // a sharp jump in the residual is the explicit term going unstable
        let unstable = next.residual > 10.0 * state.residual.max(osc) + 1.0;
        if blown || unstable {
            dt *= 0.5;
            if dt < 1e-12 {
                return Err(HjbError::BlowUp {
                    time,
                    grad_norm: next.grad_norm,
                    dt,
                });
            }
            continue;
        }
        time += dt;
        steps += 1;
        history.push(next.lambda + shift);
        state = next;
        nonlinear = next_nl;
    }

    let mut newton_iterations = 0;
    if cfg.newton {
        let (polished, iters) = newton_polish(state, &ft, h, s, cfg);
        state = polished;
        newton_iterations = iters;
    }
    if !(state.residual <= cfg.tol) {
        return Err(HjbError::NonConvergence {
            time,
            residual: state.residual,
            lambda_history: history,
        });
    }
    Ok(ErgodicSolution {
        u: state.v,
        lambda: state.lambda + shift,
        grad_norm: state.grad_norm,
        residual: state.residual,
        steps,
        newton_iterations,
        final_time: time,
        dt,
        lambda_history: history,
    })
}

/// Newton on the stationary residual. The unknown is one field whose mean
/// carries `δλ` and whose fluctuation carries `δu`, so the Jacobian is
/// `x ↦ (-Δ)^s x + P[∇H(∇u)·∇x] + ⟨x⟩`. Iterates until the residual stalls.
fn newton_polish(mut state: State, ft: &SpectralField, h: &Hamiltonian, s: f64, cfg: &HjbConfig) -> (State, usize) {
    let grid = ft.grid().clone();
    let floor = 1e-4 * cfg.tol;
    let mut iters = 0;
    while iters < cfg.max_newton && state.residual > floor {
        let u = &state.v;
        let drift = h.grad_field(&spectral::gradient(u));
        let rhs = spectral::fractional_laplacian_unchecked(u, s)
            .sub(ft)
            .add(&hamiltonian_term(u, h, cfg.dealias).0)
            .add_scalar(state.lambda)
            .scale(-1.0);
        let to_field = |x: &[f64]| SpectralField::new(&grid, x.to_vec()).expect("length matches grid");
        let apply = |x: &[f64]| {
            let xf = to_field(x);
            let transport = spectral::filtered(drift.dot(&spectral::gradient(&xf)), cfg.dealias);
            spectral::fractional_laplacian_unchecked(&xf, s)
                .add(&transport)
                .add_scalar(xf.mean())
                .into_values()
        };
        let precondition = |y: &[f64]| {
            let yf = to_field(y);
            let g = yf.grid().clone();
            spectral::apply_multiplier(&yf, |i| {
                if i == 0 {
                    Complex64::new(1.0, 0.0)
                } else if g.is_nyquist(i) {
                    Complex64::default()
                } else {
                    Complex64::new(1.0 / spectral::fractional_symbol(&g, i, s), 0.0)
                }
            })
            .into_values()
        };
        let out = gmres(apply, precondition, rhs.values(), 1e-12, 50, 400);
        iters += 1;
        let step = to_field(&out.x);
        let du = fluctuation(&step);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = state.v.lincomb(1.0, &du, t);
            let (cand, _) = evaluate(trial, ft, h, s, cfg.dealias);
            if cand.residual < state.residual {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                let stalled = next.residual > 0.5 * state.residual;
                state = next;
                if stalled && state.residual <= cfg.tol {
                    break;
                }
            }
            None => break,
        }
    }
    (state, iters)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GradientRegime {
    /// `γ ≤ 2s`: the gradient bound holds for merely bounded data.
    IshiiLions,
    /// `γ > 2s`: a gradient bound needs Lipschitz data.
    BernsteinOnly,
}

impl GradientRegime {
    pub fn label(self) -> &'static str {
        match self {
            Self::IshiiLions => "Ishii–Lions regime (γ ≤ 2s)",
            Self::BernsteinOnly => "Bernstein regime only",
        }
    }

    pub fn classify(gamma: f64, s: f64) -> Self {
        if gamma <= 2.0 * s {
            Self::IshiiLions
        } else {
            Self::BernsteinOnly
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub grad_u: f64,
    pub sup_u: f64,
    pub sup_f: f64,
    pub grad_f: f64,
    pub abs_lambda: f64,
    pub regime: GradientRegime,
    pub regime_label: &'static str,
}

/// Size diagnostics for a solution; no bound is asserted.
pub fn gradient_estimate_diag(sol: &ErgodicSolution, f: &SpectralField, h: &Hamiltonian, s: f64) -> GradientReport {
    let regime = GradientRegime::classify(h.gamma(), s);
    GradientReport {
        grad_u: spectral::gradient(&sol.u).magnitude().sup_norm(),
        sup_u: sol.u.sup_norm(),
        sup_f: f.sup_norm(),
        grad_f: spectral::gradient(f).magnitude().sup_norm(),
        abs_lambda: sol.lambda.abs(),
        regime,
        regime_label: regime.label(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos1(g: &PeriodicGrid, a: f64) -> SpectralField {
        SpectralField::from_fn(g, |x| a * (2.0 * PI * x[0]).cos())
    }

    #[test]
    fn constant_data_is_exact() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let sol = solve_ergodic(&SpectralField::constant(&g, 2.5), &Hamiltonian::quadratic(), 0.75, &HjbConfig::default()).unwrap();
        assert_eq!(sol.lambda, 2.5);
        assert_eq!(sol.u.sup_norm(), 0.0);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn small_data_matches_linearization() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let s = 0.75;
        let a = 1e-3;
        let f = cos1(&g, a);
        let sol = solve_ergodic(&f, &Hamiltonian::quadratic(), s, &HjbConfig::default()).unwrap();
        assert!(sol.lambda.abs() <= 1e-4);
        let lin = spectral::inverse_fractional_laplacian(&f, s);
        assert!(sol.u.max_abs_diff(&lin) <= 10.0 * a * a);
        // second order: λ = -⟨|∇u₁|²/2⟩ with u₁ = a(2π)^{-2s} cos
        let expect = -0.25 * (a * (2.0 * PI).powf(1.0 - 2.0 * s)).powi(2);
        assert!((sol.lambda - expect).abs() <= 1e-3 * a * a);
    }

    #[test]
    fn residual_and_bounds_hold() {
        let g = PeriodicGrid::new(2, 32).unwrap();
        let f = SpectralField::from_fn(&g, |x| (2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * (x[0] + x[1])).sin());
        let h = Hamiltonian::new(1.5, 1.0, 0.0).unwrap();
        let cfg = HjbConfig::default();
        let sol = solve_ergodic(&f, &h, 0.8, &cfg).unwrap();
        assert!(sol.residual <= cfg.tol);
        assert_eq!(sol.u.mean(), 0.0);
        let (lo, hi) = lambda_bounds(&f, &h);
        assert!(lo - cfg.tol <= sol.lambda && sol.lambda <= hi + cfg.tol);
        assert!((hjb_residual(&sol.u, sol.lambda, &f, &h, 0.8, true) - sol.residual).abs() < 1e-14);
    }

    #[test]
    fn marching_alone_converges() {
        let g = PeriodicGrid::new(1, 64).unwrap();
        let f = cos1(&g, 1.0);
        let cfg = HjbConfig { newton: false, ..HjbConfig::default() };
        let a = solve_ergodic(&f, &Hamiltonian::quadratic(), 0.7, &cfg).unwrap();
        let b = solve_ergodic(&f, &Hamiltonian::quadratic(), 0.7, &HjbConfig::default()).unwrap();
        assert!(a.newton_iterations == 0 && a.residual <= cfg.tol);
        assert!((a.lambda - b.lambda).abs() < 1e-7);
    }

    #[test]
    fn bounds_of_cosine() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let (lo, hi) = lambda_bounds(&cos1(&g, 1.0), &Hamiltonian::quadratic());
        assert_eq!((lo, hi), (-1.0, 1.0));
    }

    #[test]
    fn regime_labels() {
        assert_eq!(GradientRegime::classify(1.4, 0.75).label(), "Ishii–Lions regime (γ ≤ 2s)");
        assert_eq!(GradientRegime::classify(1.8, 0.6).label(), "Bernstein regime only");
    }

    #[test]
    fn non_convergence_carries_history() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let cfg = HjbConfig { max_time: 0.3, newton: false, ..HjbConfig::default() };
        match solve_ergodic(&cos1(&g, 1.0), &Hamiltonian::quadratic(), 0.75, &cfg) {
            Err(HjbError::NonConvergence { lambda_history, .. }) => assert!(!lambda_history.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
