//! Radial power-law Hamiltonians, their convex conjugates and the structural
//! checks the existence theory relies on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{SpectralField, VectorField};
use crate::grid::MAX_DIM;

#[derive(Debug, Error, PartialEq)]
pub enum HamiltonianError {
    #[error("growth exponent gamma must exceed 1, got {0}")]
    Gamma(f64),
    #[error("leading coefficient must be positive, got {0}")]
    Coeff(f64),
    #[error("smoothing_delta must be nonnegative, got {0}")]
    Smoothing(f64),
}

/// `H(p) = coeff·|p|^γ`, or with `smoothing_delta = δ > 0`
/// `H(p) = coeff·((δ² + |p|²)^{γ/2} - δ^γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hamiltonian {
    gamma: f64,
    coeff: f64,
    smoothing_delta: f64,
}

impl Hamiltonian {
    pub fn new(gamma: f64, coeff: f64, smoothing_delta: f64) -> Result<Self, HamiltonianError> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(HamiltonianError::Gamma(gamma));
        }
        if !(coeff > 0.0) || !coeff.is_finite() {
            return Err(HamiltonianError::Coeff(coeff));
        }
        if !(smoothing_delta >= 0.0) || !smoothing_delta.is_finite() {
            return Err(HamiltonianError::Smoothing(smoothing_delta));
        }
        Ok(Self {
            gamma,
            coeff,
            smoothing_delta,
        })
    }

    /// `|p|^γ / γ`.
    pub fn power(gamma: f64) -> Result<Self, HamiltonianError> {
        Self::new(gamma, 1.0 / gamma, 0.0)
    }

    pub fn quadratic() -> Self {
        Self::power(2.0).expect("gamma = 2 is valid")
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn smoothing_delta(&self) -> f64 {
        self.smoothing_delta
    }

    /// `γ' = γ/(γ-1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        self.gamma / (self.gamma - 1.0)
    }

    /// Radial profile `h(r)` with `H(p) = h(|p|)`.
    pub fn profile(&self, r: f64) -> f64 {
        let d = self.smoothing_delta;
        if d == 0.0 {
            self.coeff * r.powf(self.gamma)
        } else {
            self.coeff * ((d * d + r * r).powf(0.5 * self.gamma) - d.powf(self.gamma))
        }
    }

    /// `h'(r)/r`, so that `∇H(p) = slope(|p|)·p`; zero at the origin when
    /// the limit is singular.
    fn slope(&self, r: f64) -> f64 {
        let d = self.smoothing_delta;
        let cg = self.coeff * self.gamma;
        if d == 0.0 {
            if r == 0.0 {
                if self.gamma == 2.0 {
                    cg
                } else {
                    0.0
                }
            } else {
                cg * r.powf(self.gamma - 2.0)
            }
        } else {
            cg * (d * d + r * r).powf(0.5 * self.gamma - 1.0)
        }
    }

    /// `h'(r)`.
    fn profile_derivative(&self, r: f64) -> f64 {
        self.slope(r) * r
    }

    fn profile_second_derivative(&self, r: f64) -> f64 {
        let d = self.smoothing_delta;
        let cg = self.coeff * self.gamma;
        if d == 0.0 {
            cg * (self.gamma - 1.0) * r.powf(self.gamma - 2.0)
        } else {
            let s = d * d + r * r;
            cg * s.powf(0.5 * self.gamma - 2.0) * (d * d + (self.gamma - 1.0) * r * r)
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.profile(norm(p))
    }

    pub fn grad(&self, p: &[f64]) -> [f64; MAX_DIM] {
        let k = self.slope(norm(p));
        let mut out = [0.0; MAX_DIM];
        for (o, pi) in out.iter_mut().zip(p) {
            *o = k * pi;
        }
        out
    }

    /// Coefficient `a` in the closed form `L(q) = a·|q|^{γ'}` (unsmoothed case).
    pub fn conjugate_coeff(&self) -> f64 {
        let gp = self.conjugate_exponent();
        self.coeff * (self.gamma - 1.0) * (self.coeff * self.gamma).powf(-gp)
    }

    /// Radius `r ≥ 0` with `h'(r) = t`, the magnitude of `(∇H)^{-1}` at `|q| = t`.
    fn inverse_radius(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if self.smoothing_delta == 0.0 {
            return (t / (self.coeff * self.gamma)).powf(self.conjugate_exponent() - 1.0);
        }
        let mut hi = 1.0;
        while self.profile_derivative(hi) < t {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        let mut r = 0.5 * hi;
        for _ in 0..200 {
            let g = self.profile_derivative(r) - t;
            if g.abs() <= 1e-15 * t.max(1.0) {
                break;
            }
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let dg = self.profile_second_derivative(r);
            let newton = r - g / dg;
            r = if dg > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        r
    }

    /// Convex conjugate `L(q) = sup_p p·q - H(p)`.
    pub fn eval_l(&self, q: &[f64]) -> f64 {
        let t = norm(q);
        if self.smoothing_delta == 0.0 {
            return self.conjugate_coeff() * t.powf(self.conjugate_exponent());
        }
        let r = self.inverse_radius(t);
        t * r - self.profile(r)
    }

    /// `∇L(q) = (∇H)^{-1}(q)`.
    pub fn grad_l(&self, q: &[f64]) -> [f64; MAX_DIM] {
        let t = norm(q);
        let mut out = [0.0; MAX_DIM];
        if t == 0.0 {
            return out;
        }
        let scale = self.inverse_radius(t) / t;
        for (o, qi) in out.iter_mut().zip(q) {
            *o = scale * qi;
        }
        out
    }

    /// `m·H(p) + p·w + m·L(-w/m)`: nonnegative, zero exactly at `w = -m∇H(p)`.
    /// `m = 0` contributes 0 when `w = 0` and `+∞` otherwise.
    pub fn legendre_residual(&self, p: &[f64], m: f64, w: &[f64]) -> f64 {
        if m < 0.0 {
            return f64::INFINITY;
        }
        if m == 0.0 {
            return if w.iter().all(|&x| x == 0.0) {
                0.0
            } else {
                f64::INFINITY
            };
        }
        let q: Vec<f64> = w.iter().map(|x| -x / m).collect();
        let pw: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
        m * self.eval(p) + pw + m * self.eval_l(&q)
    }

    /// Constant `C_L` with `C_L|q|^{γ'} - 1/C_L ≤ L(q) ≤ (|q|^{γ'} + 1)/C_L`
    /// for the unsmoothed family.
    pub fn envelope_constant(&self) -> f64 {
        let a = self.conjugate_coeff();
        a.min(1.0 / a)
    }

    /// Pointwise `H(∇u)` for a gradient field.
    pub fn eval_field(&self, p: &VectorField) -> SpectralField {
        let grid = p.grid();
        let values = (0..grid.len()).map(|i| self.eval(&p.at(i)[..p.dim()])).collect();
        SpectralField::new(grid, values).expect("length matches grid")
    }

    /// Pointwise `∇H(∇u)`.
    pub fn grad_field(&self, p: &VectorField) -> VectorField {
        let grid = p.grid();
        let dim = p.dim();
        let samples: Vec<[f64; MAX_DIM]> = (0..grid.len()).map(|i| self.grad(&p.at(i)[..dim])).collect();
        let comps = (0..dim)
            .map(|d| {
                SpectralField::new(grid, samples.iter().map(|v| v[d]).collect())
                    .expect("length matches grid")
            })
            .collect();
        VectorField::new(comps).expect("components share a grid")
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Anything that can be probed by [`verify_assumptions`].
pub trait HamiltonianModel {
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64]) -> [f64; MAX_DIM];
    fn growth(&self) -> f64;
}

impl HamiltonianModel for Hamiltonian {
    fn value(&self, p: &[f64]) -> f64 {
        self.eval(p)
    }

    fn gradient(&self, p: &[f64]) -> [f64; MAX_DIM] {
        self.grad(p)
    }

    fn growth(&self) -> f64 {
        self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Inequality {
    /// `C|p|^γ - 1/C ≤ H(p) ≤ (|p|^γ + 1)/C`
    Growth,
    /// `∇H(p)·p - H(p) ≥ C|p|^γ - K`
    Coercivity,
    /// `|∇H(p)| ≤ C|p|^{γ-1}`
    GradientBound,
    Convexity,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub inequality: Inequality,
    pub point: Vec<f64>,
}

/// Empirical constants witnessing the structural inequalities on a sample.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub growth_constant: f64,
    pub coercivity_constant: f64,
    pub coercivity_offset: f64,
    pub gradient_constant: f64,
    pub samples: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl AssumptionReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn fails(&self, which: Inequality) -> bool {
        self.counterexamples.iter().any(|c| c.inequality == which)
    }
}

fn sample_directions(dim: usize) -> Vec<[f64; MAX_DIM]> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..16)
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * j as f64 / 16.0 + 0.1;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        _ => {
            let mut dirs = Vec::new();
            for a in -1i32..=1 {
                for b in -1i32..=1 {
                    for c in -1i32..=1 {
                        if (a, b, c) == (0, 0, 0) {
                            continue;
                        }
                        let v = [a as f64, b as f64 + 0.13 * a as f64, c as f64 - 0.07 * b as f64];
                        let n = norm(&v);
                        dirs.push([v[0] / n, v[1] / n, v[2] / n]);
                    }
                }
            }
            dirs
        }
    }
}

/// Probes the growth, coercivity, gradient and convexity conditions on a
/// deterministic sample of the ball `|p| ≤ sample_radius` in `R^dim`.
pub fn verify_assumptions<H: HamiltonianModel>(h: &H, dim: usize, sample_radius: f64) -> AssumptionReport {
    let gamma = h.growth();
    let dirs = sample_directions(dim.clamp(1, MAX_DIM));
    let radii: Vec<f64> = (0..=40).map(|i| sample_radius * i as f64 / 40.0).collect();
    let mut points: Vec<Vec<f64>> = Vec::new();
    for r in &radii {
        for d in &dirs {
            points.push(d[..dim.clamp(1, MAX_DIM)].iter().map(|x| x * r).collect());
        }
    }
    let mut counterexamples = Vec::new();

    // coercivity: slope of ∇H·p - H against |p|^γ away from the origin
    let excess = |p: &[f64]| {
        let g = h.gradient(p);
        let gp: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
        gp - h.value(p)
    };
    let mut coercivity_constant = f64::INFINITY;
    let mut gradient_constant: f64 = 0.0;
    let mut growth_constant: f64 = 1.0;
    for p in &points {
        let r = norm(p);
        let hp = h.value(p);
        if r >= 1.0 {
            coercivity_constant = coercivity_constant.min(excess(p) / r.powf(gamma));
            growth_constant = growth_constant.min(hp / r.powf(gamma));
        }
        if hp > 0.0 {
            growth_constant = growth_constant.min((r.powf(gamma) + 1.0) / hp);
        }
        if r > 0.0 {
            let g = h.gradient(p);
            gradient_constant = gradient_constant.max(norm(&g[..p.len()]) / r.powf(gamma - 1.0));
        }
    }
    if !coercivity_constant.is_finite() {
        coercivity_constant = 0.0;
    }
    let mut coercivity_offset: f64 = 0.0;
    for p in &points {
        let r = norm(p);
        coercivity_offset = coercivity_offset.max(coercivity_constant * r.powf(gamma) - excess(p));
    }
    if coercivity_constant <= 0.0 {
        let worst = points
            .iter()
            .filter(|p| norm(p) >= 1.0)
            .min_by(|a, b| excess(a).total_cmp(&excess(b)))
            .cloned()
            .unwrap_or_default();
        counterexamples.push(Counterexample {
            inequality: Inequality::Coercivity,
            point: worst,
        });
    }
    if !gradient_constant.is_finite() {
        counterexamples.push(Counterexample {
            inequality: Inequality::GradientBound,
            point: vec![0.0; dim],
        });
    }
    if growth_constant > 0.0 {
        let c = growth_constant;
        if let Some(p) = points.iter().find(|p| {
            let r = norm(p).powf(gamma);
            let hp = h.value(p);
            c * r - 1.0 / c > hp + 1e-12 || hp > (r + 1.0) / c + 1e-12
        }) {
            counterexamples.push(Counterexample {
                inequality: Inequality::Growth,
                point: p.clone(),
            });
        }
    } else {
        counterexamples.push(Counterexample {
            inequality: Inequality::Growth,
            point: points.iter().find(|p| h.value(p) <= 0.0 && norm(p) >= 1.0).cloned().unwrap_or_default(),
        });
    }

    // midpoint convexity on pairs from a thinned sample
    let thin: Vec<&Vec<f64>> = points.iter().step_by(7).collect();
    'outer: for (i, p) in thin.iter().enumerate() {
        for q in thin.iter().skip(i + 1) {
            let mid: Vec<f64> = p.iter().zip(q.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = h.value(&mid);
            let rhs = 0.5 * (h.value(p) + h.value(q));
            if lhs > rhs + 1e-12 * (1.0 + rhs.abs()) {
                counterexamples.push(Counterexample {
                    inequality: Inequality::Convexity,
                    point: mid,
                });
                break 'outer;
            }
        }
    }

    AssumptionReport {
        growth_constant,
        coercivity_constant,
        coercivity_offset,
        gradient_constant,
        samples: points.len(),
        counterexamples,
    }
}
