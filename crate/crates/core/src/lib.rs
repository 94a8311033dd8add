//! Pseudo-spectral solvers for stationary fractional mean field game systems
//! on the periodic unit torus.
//!
//! The system solved for `(u, λ, m)` with `s ∈ (1/2, 1)` is
//!
//! ```text
//! (-Δ)^s u + H(∇u) + λ = f(x, m)
//! (-Δ)^s m - div(m ∇H(∇u)) = 0
//! ∫ m dx = 1
//! ```
//!
//! Modules are layered bottom-up: [`grid`], [`field`] and [`spectral`] carry
//! the discretization; [`hamiltonian`] and [`coupling`] the model data;
//! [`fokker_planck`] and [`hjb`] the two single-equation solvers; [`mfg`]
//! the coupled fixed point and [`variational`] the energy route.

pub mod coupling;
pub mod field;
pub mod field_io;
pub mod fokker_planck;
pub mod grid;
pub mod growth;
pub mod hamiltonian;
pub mod hjb;
pub mod iterative;
pub mod mfg;
pub mod spectral;
pub mod variational;

pub use field::{SpectralField, VectorField};
pub use grid::PeriodicGrid;
pub use hamiltonian::Hamiltonian;
pub use spectral::SpectralError;
