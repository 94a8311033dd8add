//! Growth conditions linking `s`, `γ`, `q` and the dimension, and the
//! integrability exponents derived from them.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthCondition {
    /// `s ∈ (1/2, 1)`.
    OrderRange,
    /// `1 < q < 1 + (2s-1)/N · γ/(γ-1)`.
    CouplingGrowth,
    /// `1 < γ < N/(N-2s+1)` for `N > 1`, `1 < γ ≤ 2s` for `N = 1`.
    HamiltonianGrowth,
    /// `γ' > N/(2s-1)`.
    ConjugateExponent,
}

impl GrowthCondition {
    /// Short name used in diagnostics and configuration errors.
    pub fn label(self) -> &'static str {
        match self {
            Self::OrderRange => "s range",
            Self::CouplingGrowth => "gr2 growth bound",
            Self::HamiltonianGrowth => "assFlocal gamma bound",
            Self::ConjugateExponent => "assgamma conjugate exponent bound",
        }
    }
}

impl fmt::Display for GrowthCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCheck {
    pub condition: GrowthCondition,
    pub passed: bool,
    /// The parameter being constrained.
    pub value: f64,
    /// The threshold it was compared against.
    pub bound: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub checks: Vec<GrowthCheck>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GrowthCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, condition: GrowthCondition) -> Option<&GrowthCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Checks the local-coupling regime. Nothing here errors: violations are
/// reported as failed checks.
pub fn validate_growth(s: f64, gamma: f64, q: f64, dim: usize) -> GrowthReport {
    let n = dim as f64;
    let mut checks = Vec::with_capacity(4);
    checks.push(GrowthCheck {
        condition: GrowthCondition::OrderRange,
        passed: s > 0.5 && s < 1.0,
        value: s,
        bound: 0.5,
        detail: format!("s must lie in (1/2, 1), got {s}"),
    });

    let gamma_prime = gamma / (gamma - 1.0);
    let q_bound = 1.0 + (2.0 * s - 1.0) / n * gamma_prime;
    checks.push(GrowthCheck {
        condition: GrowthCondition::CouplingGrowth,
        passed: gamma > 1.0 && q > 1.0 && q < q_bound,
        value: q,
        bound: q_bound,
        detail: format!("requires 1 < q < {q_bound}, got q = {q}"),
    });

    let (gamma_ok, gamma_bound, rel) = if dim > 1 {
        let b = n / (n - 2.0 * s + 1.0);
        (gamma > 1.0 && gamma < b, b, "<")
    } else {
        let b = 2.0 * s;
        (gamma > 1.0 && gamma <= b, b, "<=")
    };
    checks.push(GrowthCheck {
        condition: GrowthCondition::HamiltonianGrowth,
        passed: gamma_ok,
        value: gamma,
        bound: gamma_bound,
        detail: format!("requires 1 < gamma {rel} {gamma_bound} for N = {dim}, got gamma = {gamma}"),
    });

    let gp_bound = n / (2.0 * s - 1.0);
    checks.push(GrowthCheck {
        condition: GrowthCondition::ConjugateExponent,
        passed: gamma > 1.0 && gamma_prime > gp_bound,
        value: gamma_prime,
        bound: gp_bound,
        detail: format!("requires gamma' > {gp_bound}, got gamma' = {gamma_prime}"),
    });
    GrowthReport { checks }
}

#[derive(Debug, Error)]
pub enum ExponentError {
    #[error("exponent {name} must exceed 1, got {value}")]
    Degenerate { name: &'static str, value: f64 },
    #[error("fractional order must lie in (1/2, 1], got {0}")]
    Order(f64),
}

/// Integrability exponents `(r_p, θ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub r_p: f64,
    pub theta: f64,
    pub delta: f64,
}

/// `1/r_p = 1/γ' + (1 - 1/γ')/p`, `1/θ = 1 - 1/γ' + (2s-1)/N · q/(q-1)` and
/// `δ = ((γ'(2s-1) + N)/N - q)/(q-1)`, which is positive exactly when the
/// coupling growth bound holds.
pub fn a_priori_exponents(s: f64, gamma: f64, q: f64, dim: usize, p: f64) -> Result<Exponents, ExponentError> {
    for (name, value) in [("gamma", gamma), ("q", q), ("p", p)] {
        if !(value > 1.0) {
            return Err(ExponentError::Degenerate { name, value });
        }
    }
    if !(s > 0.5 && s <= 1.0) {
        return Err(ExponentError::Order(s));
    }
    let n = dim as f64;
    let gp = gamma / (gamma - 1.0);
    let inv_r = 1.0 / gp + (1.0 - 1.0 / gp) / p;
    let inv_theta = 1.0 - 1.0 / gp + (2.0 * s - 1.0) / n * q / (q - 1.0);
    let delta = ((gp * (2.0 * s - 1.0) + n) / n - q) / (q - 1.0);
    Ok(Exponents {
        r_p: 1.0 / inv_r,
        theta: 1.0 / inv_theta,
        delta,
    })
}
