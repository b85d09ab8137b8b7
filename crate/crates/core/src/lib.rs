//! Stability and recurrence certificates for regime-switching diffusions.
//!
//! A regime-switching diffusion is a pair `(X_t, Λ_t)` where `X` solves an SDE
//! whose drift and diffusion depend on the current regime `Λ`, and `Λ` is a
//! continuous-time Markov chain whose jump rates may depend on `X`. This crate
//! decides whether the equilibrium `x = 0` is (asymptotically) stable or
//! unstable in probability, and whether the process is recurrent or transient,
//! by building explicit Lyapunov-type witnesses:
//!
//! - [`certificates`]: averaging against the invariant measure (a Poisson-equation
//!   solve), nonsingular M-matrix tests, sphere rates for power-law coefficients,
//!   and finite aggregation of countable regime spaces;
//! - [`spectral`]: the principal eigenvalue of the bilinear form
//!   `E(f) = <f, -Ωf>` with `Ω = Q + diag(γ)`, test-function lower bounds and
//!   localization;
//! - [`montecarlo`]: a seeded Euler–Maruyama simulator with exact interval-based
//!   switching, used to cross-check verdicts empirically.
//!
//! Regimes are indexed from 0 throughout.

pub mod analysis;
pub mod certificates;
pub mod chain;
mod error;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod presets;
pub mod scenario;
pub mod scenario_file;
pub mod spectral;
pub mod verdict;

pub use error::{Error, Result};
pub use verdict::{Certificate, Criterion, Verdict, VerdictKind};
