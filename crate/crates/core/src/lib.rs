//! Reduced dynamics of a Λ-type three-level quantum system coupled to a
//! thermal bosonic reservoir.
//!
//! One level `E0` is separated by a gap `Δ = E0 − E` from two quasi-degenerate
//! levels `E ± σ/2`. For `σ ≪ λ² ≪ Δ` the relaxation to equilibrium happens in
//! two stages: a fast approach (rate ∝ λ²) onto a one-parameter manifold of
//! quasi-stationary states, followed by a slow collapse (rate ∝ σ²/λ²) onto
//! the Gibbs state.
//!
//! Module map:
//! - [`reservoir`] — bath spectral density, correlation function and the
//!   derived constants δ, ϑ, η entering the resonance energies.
//! - [`system`] — exact finite-dimensional algebra of the three-level system
//!   (Hamiltonians, Gibbs/dark states, Liouville embedding, invariant manifold).
//! - [`resonance`] — level shift operators, their spectra (numeric and
//!   perturbative) and the nine-resonance set.
//! - [`dynamics`] — the propagator `U(t)`, the reduced dynamics `T_t`,
//!   trajectories, rate fits and observation formulas.
//! - [`validate`] — the built-in validation suite driven by the CLI and the
//!   acceptance tests.

pub mod dynamics;
pub mod linalg;
pub mod quad;
pub mod reservoir;
pub mod resonance;
pub mod system;
pub mod validate;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical procedure failed to converge or lost accuracy.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// An internal invariant was violated (indicates a bug or an
    /// out-of-regime input that broke a structural assumption).
    #[error("internal consistency error: {0}")]
    Inconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
