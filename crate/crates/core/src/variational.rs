//! The energy `E(m, w) = ∫ m L(-w/m) + F(x, m)` over pairs satisfying
//! `(-Δ)^s m = -div w` with unit mass, its minimization, and the duality
//! diagnostics linking minimizers to solutions of the coupled system.
//!
//! The constraint is eliminated: `w` is free and `m` is recovered from it by
//! [`solve_div_source`](crate::fokker_planck::solve_div_source), so every
//! iterate is exactly feasible. Writing `m = 1 + A w` with
//! `A w = -(-Δ)^{-s} div w`, the reduced gradient is
//!
//! ```text
//! ∂E/∂w = -∇L(q) + ∇(-Δ)^{-s} g,   q = -w/m,   g = L(q) - q·∇L(q) + f(x, m)
//! ```
//!
//! and at a critical point `u = (-Δ)^{-s} g` solves the HJB equation with
//! `w = -m∇H(∇u)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{Coupling, CouplingError, LocalCoupling, NEGATIVE_CLAMP};
use crate::field::{SpectralField, VectorField};
use crate::fokker_planck::{self, FpError};
use crate::grid::MAX_DIM;
use crate::hamiltonian::Hamiltonian;
use crate::mfg::{MfgDiagnostics, MfgProblem, MfgSolution};
use crate::spectral::{self, SpectralError};

/// Default floor for `m` in the kinetic integrand.
pub const DEFAULT_CLAMP: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("pair violates the continuity constraint (residual {residual:e} > {tol:e})")]
    Constraint { residual: f64, tol: f64 },
    #[error("variational route needs a local coupling")]
    NonlocalCoupling,
    #[error("energy is infinite: flux does not vanish where the density does; try a larger clamp or smoothing")]
    InfiniteEnergy,
    #[error(
        "energy minimization did not converge in {iterations} iterations (gradient {gradient:e}, last energy {last})",
        last = history.last().copied().unwrap_or(f64::NAN)
    )]
    NonConvergence { iterations: usize, gradient: f64, history: Vec<f64> },
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// A density–flux pair.
#[derive(Debug, Clone)]
pub struct FlowPair {
    pub m: SpectralField,
    pub w: VectorField,
    pub s: f64,
    /// `∫ m L(-w/m)`.
    pub kinetic: f64,
}

impl FlowPair {
    pub fn new(m: SpectralField, w: VectorField, s: f64, h: &Hamiltonian) -> Self {
        let kinetic = kinetic_energy(&m, &w, h, DEFAULT_CLAMP);
        Self { m, w, s, kinetic }
    }

    /// The feasible pair generated by a flux: `m` solves `(-Δ)^s m = -div w`
    /// with unit mass.
    pub fn from_flux(w: VectorField, s: f64, h: &Hamiltonian) -> Result<Self, VariationalError> {
        let m = fokker_planck::solve_div_source(&w.scale(-1.0), s)?;
        Ok(Self::new(m, w, s, h))
    }

    /// `max_k |(2π|k|)^{2s} m̂_k + 2πi k·ŵ_k|` over nonzero, non-Nyquist modes.
    pub fn constraint_residual(&self) -> f64 {
        let grid = self.m.grid();
        let lhs = spectral::fractional_laplacian_unchecked(&self.m, self.s);
        let div = spectral::divergence(&self.w);
        lhs.coeffs()
            .iter()
            .zip(div.coeffs())
            .enumerate()
            .filter(|(i, _)| *i != 0 && !grid.is_nyquist(*i))
            .map(|(_, (a, b))| (a + b).norm())
            .fold(0.0, f64::max)
    }
}

/// `∫ m L(-w/m)` by grid quadrature, with `m` floored at `clamp`; points with
/// `m ≤ 0` contribute 0 when `w = 0` and `+∞` otherwise.
pub fn kinetic_energy(m: &SpectralField, w: &VectorField, h: &Hamiltonian, clamp: f64) -> f64 {
    let dim = w.dim();
    let total: f64 = (0..m.grid().len())
        .map(|i| {
            let mi = m.values()[i];
            let wi = w.at(i);
            kinetic_density(h, mi, &wi[..dim], clamp)
        })
        .sum();
    total / m.grid().len() as f64
}

fn kinetic_density(h: &Hamiltonian, m: f64, w: &[f64], clamp: f64) -> f64 {
    let zero_flux = w.iter().all(|&x| x == 0.0);
    if m <= 0.0 {
        return if zero_flux { 0.0 } else { f64::INFINITY };
    }
    if zero_flux {
        return 0.0;
    }
    let m = m.max(clamp);
    let mut q = [0.0; MAX_DIM];
    for (qi, wi) in q.iter_mut().zip(w) {
        *qi = -wi / m;
    }
    m * h.eval_l(&q[..w.len()])
}

/// `∫ |w|^{γ'} / m^{γ'-1}`, the quantity controlled by the energy.
pub fn kinetic_power(m: &SpectralField, w: &VectorField, gamma_prime: f64, clamp: f64) -> f64 {
    let mag = w.magnitude();
    let total: f64 = m
        .values()
        .iter()
        .zip(mag.values())
        .map(|(&mi, &wi)| {
            if wi == 0.0 {
                0.0
            } else if mi <= 0.0 {
                f64::INFINITY
            } else {
                wi.powf(gamma_prime) / mi.max(clamp).powf(gamma_prime - 1.0)
            }
        })
        .sum();
    total / m.grid().len() as f64
}

/// Tolerance for accepting a pair as feasible, scaled by the flux size.
fn constraint_tol(pair: &FlowPair) -> f64 {
    1e-10 * (1.0 + pair.w.sup_norm())
}

/// `E(m, w) = ∫ m L(-w/m) + F(x, m)`; only defined on feasible pairs.
pub fn energy(pair: &FlowPair, h: &Hamiltonian, coupling: &LocalCoupling) -> Result<f64, VariationalError> {
    let residual = pair.constraint_residual();
    let tol = constraint_tol(pair);
    if !(residual <= tol) {
        return Err(VariationalError::Constraint { residual, tol });
    }
    if let Some((index, &value)) = pair.m.values().iter().enumerate().find(|(_, &v)| v < -NEGATIVE_CLAMP) {
        return Err(CouplingError::NegativeDensity { index, value }.into());
    }
    Ok(kinetic_energy(&pair.m, &pair.w, h, DEFAULT_CLAMP) + coupling.integrated_primitive(&pair.m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationalConfig {
    /// Stop when the RMS reduced gradient falls below this.
    pub gtol: f64,
    /// Relative energy change below which a failed line search counts as
    /// stationarity.
    pub energy_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub clamp: f64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            gtol: 1e-9,
            energy_tol: 1e-14,
            max_iter: 1000,
            memory: 10,
            clamp: DEFAULT_CLAMP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalSolution {
    pub pair: FlowPair,
    /// `(-Δ)^{-s} g`, the value function read off the first-order conditions.
    pub u: SpectralField,
    /// `J(m, w) = ∫ m L(-w/m) + f(x, m) m`.
    pub lambda: f64,
    pub energy: f64,
    pub potential: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
    pub kinetic_power_history: Vec<f64>,
}

struct Evaluation {
    pair: FlowPair,
    energy: f64,
    potential: f64,
    gradient: Vec<f64>,
    g: SpectralField,
}

fn flatten(w: &VectorField) -> Vec<f64> {
    w.components().iter().flat_map(|c| c.values().iter().copied()).collect()
}

fn unflatten(grid: &crate::grid::PeriodicGrid, x: &[f64]) -> VectorField {
    let n = grid.len();
    let comps = x
        .chunks(n)
        .map(|c| SpectralField::new(grid, c.to_vec()).expect("chunk length matches grid"))
        .collect();
    VectorField::new(comps).expect("components share a grid")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rms(a: &[f64]) -> f64 {
    (dot(a, a) / a.len() as f64).sqrt()
}

struct Reduced<'a> {
    h: &'a Hamiltonian,
    coupling: &'a LocalCoupling,
    s: f64,
    clamp: f64,
    grid: crate::grid::PeriodicGrid,
}

impl Reduced<'_> {
    /// Energy and reduced gradient at `x`; `None` when `m` dips to the clamp.
    fn evaluate(&self, x: &[f64]) -> Result<Option<Evaluation>, VariationalError> {
        let w = unflatten(&self.grid, x);
        let m = fokker_planck::solve_div_source(&w.scale(-1.0), self.s)?;
        if m.min() <= self.clamp {
            return Ok(None);
        }
        let dim = self.grid.dim();
        let n = self.grid.len();
        let mut kinetic = 0.0;
        let mut g_vals = vec![0.0; n];
        let mut grad_l = vec![0.0; dim * n];
        for i in 0..n {
            let mi = m.values()[i];
            let wi = w.at(i);
            let mut q = [0.0; MAX_DIM];
            for d in 0..dim {
                q[d] = -wi[d] / mi;
            }
            let l = self.h.eval_l(&q[..dim]);
            let dl = self.h.grad_l(&q[..dim]);
            kinetic += mi * l;
            let qdl: f64 = (0..dim).map(|d| q[d] * dl[d]).sum();
            g_vals[i] = l - qdl + self.coupling.value(i, mi);
            for d in 0..dim {
                grad_l[d * n + i] = dl[d];
            }
        }
        kinetic /= n as f64;
        let potential = self.coupling.integrated_primitive(&m)?;
        let g = SpectralField::new(&self.grid, g_vals)?;
        let adj = spectral::gradient(&spectral::inverse_fractional_laplacian(&g, self.s));
        let adj = flatten(&adj);
        let gradient = adj.iter().zip(&grad_l).map(|(a, b)| a - b).collect();
        Ok(Some(Evaluation {
            pair: FlowPair { m, w, s: self.s, kinetic },
            energy: kinetic + potential,
            potential,
            gradient,
            g,
        }))
    }
}

/// L-BFGS with Armijo backtracking on the reduced energy, from `w = 0`
/// (`m ≡ 1`). Steps that push `m` down to the clamp are rejected.
pub fn minimize_energy(problem: &MfgProblem, cfg: &VariationalConfig) -> Result<VariationalSolution, VariationalError> {
    let coupling = match &problem.coupling {
        Coupling::Local(c) => c,
        Coupling::Nonlocal(_) => return Err(VariationalError::NonlocalCoupling),
    };
    let reduced = Reduced {
        h: &problem.hamiltonian,
        coupling,
        s: problem.s,
        clamp: cfg.clamp,
        grid: problem.grid.clone(),
    };
    let gp = problem.hamiltonian.conjugate_exponent();
    let mut x = vec![0.0; problem.grid.dim() * problem.grid.len()];
    let mut cur = reduced.evaluate(&x)?.ok_or(VariationalError::InfiniteEnergy)?;
    let mut energy_history = vec![cur.energy];
    let mut kinetic_history = vec![kinetic_power(&cur.pair.m, &cur.pair.w, gp, cfg.clamp)];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    loop {
        let gnorm = rms(&cur.gradient);
        if gnorm <= cfg.gtol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(VariationalError::NonConvergence {
                iterations,
                gradient: gnorm,
                history: energy_history,
            });
        }
        iterations += 1;
        let mut dir = two_loop(&cur.gradient, &mem);
        let mut slope = dot(&dir, &cur.gradient);
        if !(slope < 0.0) {
            mem.clear();
            dir = cur.gradient.iter().map(|g| -g).collect();
            slope = dot(&dir, &cur.gradient);
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            if let Some(ev) = reduced.evaluate(&trial)? {
                if ev.energy <= cur.energy + 1e-4 * t * slope {
                    next = Some((trial, ev));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((x_new, ev)) = next else {
            // the line search can no longer resolve a decrease
            let stalled = energy_history.len() >= 2 && {
                let k = energy_history.len();
                (energy_history[k - 2] - energy_history[k - 1]).abs() <= cfg.energy_tol * cur.energy.abs().max(1.0)
            };
            if stalled && mem.is_empty() {
                break;
            }
            if !mem.is_empty() {
                mem.clear();
                continue;
            }
            return Err(VariationalError::NonConvergence {
                iterations,
                gradient: gnorm,
                history: energy_history,
            });
        };
        let sk: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yk: Vec<f64> = ev.gradient.iter().zip(&cur.gradient).map(|(a, b)| a - b).collect();
        let sy = dot(&sk, &yk);
        if sy > 1e-16 * dot(&yk, &yk).sqrt() * dot(&sk, &sk).sqrt() {
            if mem.len() == cfg.memory.max(1) {
                mem.pop_front();
            }
            mem.push_back((sk, yk, 1.0 / sy));
        }
        x = x_new;
        cur = ev;
        energy_history.push(cur.energy);
        kinetic_history.push(kinetic_power(&cur.pair.m, &cur.pair.w, gp, cfg.clamp));
    }

    let u = spectral::inverse_fractional_laplacian(&cur.g, problem.s);
    let f = coupling.eval_local(&cur.pair.m)?;
    let lambda = cur.pair.kinetic + f.inner(&cur.pair.m);
    Ok(VariationalSolution {
        gradient_norm: rms(&cur.gradient),
        u,
        lambda,
        energy: cur.energy,
        potential: cur.potential,
        pair: cur.pair,
        iterations,
        energy_history,
        kinetic_power_history: kinetic_history,
    })
}

fn two_loop(grad: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

impl VariationalSolution {
    /// Repackages the minimizer in the fixed-point solution layout, with
    /// residuals recomputed against the system.
    pub fn to_mfg_solution(&self, problem: &MfgProblem) -> Result<MfgSolution, crate::mfg::MfgError> {
        let mut sol = MfgSolution {
            u: self.u.clone(),
            lambda: self.lambda,
            m: self.pair.m.clone(),
            w: self.pair.w.clone(),
            diagnostics: MfgDiagnostics {
                hjb_residual: f64::NAN,
                fp_residual: f64::NAN,
                mass_error: (self.pair.m.mean() - 1.0).abs(),
                outer_iterations: self.iterations,
                stages: Vec::new(),
                sandwich_ok: true,
                duality_gap: None,
                energy_value: Some(self.energy),
            },
        };
        let r = crate::mfg::system_residual(&sol, problem)?;
        sol.diagnostics.hjb_residual = r.hjb;
        sol.diagnostics.fp_residual = r.fp;
        if let Coupling::Local(c) = &problem.coupling {
            sol.diagnostics.duality_gap = Some(duality_gap(&sol, c, &problem.hamiltonian));
        }
        Ok(sol)
    }
}

/// `|λ - ∫ m L(-w/m) + f(x, m) m|`.
pub fn duality_gap(sol: &MfgSolution, coupling: &LocalCoupling, h: &Hamiltonian) -> f64 {
    let kinetic = kinetic_energy(&sol.m, &sol.w, h, DEFAULT_CLAMP);
    let f = match coupling.eval_local(&sol.m) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    (sol.lambda - kinetic - f.inner(&sol.m)).abs()
}

/// `‖w + m∇H(∇u)‖∞`.
pub fn optimality_check(sol: &MfgSolution, h: &Hamiltonian) -> f64 {
    let flux = h.grad_field(&spectral::gradient(&sol.u)).mul_scalar_field(&sol.m);
    sol.w.lincomb(1.0, &flux, 1.0).sup_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use std::f64::consts::PI;

    #[test]
    fn uniform_pair_energy() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let h = Hamiltonian::quadratic();
        let pair = FlowPair::new(SpectralField::constant(&g, 1.0), VectorField::zeros(&g), 0.75, &h);
        let f = LocalCoupling::new(1.0, 2.0).unwrap();
        assert_eq!(energy(&pair, &h, &f).unwrap(), 0.5);
    }

    #[test]
    fn infeasible_pair_rejected() {
        let g = PeriodicGrid::new(1, 32).unwrap();
        let h = Hamiltonian::quadratic();
        let w = VectorField::from_fn(&g, |x| [0.1 * (2.0 * PI * x[0]).cos(), 0.0, 0.0]);
        let pair = FlowPair::new(SpectralField::constant(&g, 1.0), w, 0.75, &h);
        assert!(matches!(
            energy(&pair, &h, &LocalCoupling::new(1.0, 2.0).unwrap()),
            Err(VariationalError::Constraint { .. })
        ));
    }

    #[test]
    fn generated_pairs_are_feasible() {
        let g = PeriodicGrid::new(2, 16).unwrap();
        let h = Hamiltonian::quadratic();
        let w = VectorField::from_fn(&g, |x| [0.2 * (2.0 * PI * x[1]).sin(), 0.1 * (4.0 * PI * x[0]).cos(), 0.0]);
        let pair = FlowPair::from_flux(w, 0.7, &h).unwrap();
        assert!(pair.constraint_residual() <= 1e-12);
        assert_eq!(pair.m.coeffs()[0].re, 1.0);
    }

    #[test]
    fn vanishing_density_with_flux_is_infinite() {
        let h = Hamiltonian::quadratic();
        assert_eq!(kinetic_density(&h, 0.0, &[0.0], DEFAULT_CLAMP), 0.0);
        assert_eq!(kinetic_density(&h, 0.0, &[1e-3], DEFAULT_CLAMP), f64::INFINITY);
    }
}
