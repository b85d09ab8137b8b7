//! Algebraic certificates: Fredholm averaging, M-matrix tests, sphere rates
//! for power-law coefficients and finite aggregation of countable regimes.

mod fredholm;
mod mmatrix;
mod nonlinear;
mod partition;

pub use fredholm::{fredholm_solve, verdict_fredholm, weighted_rate, FredholmCertificate, FREDHOLM_RESIDUAL_TOL};
pub use mmatrix::{
    all_real_eigenvalues_positive, is_nonsingular_m_matrix, is_z_matrix, verdict_mmatrix, MMatrixCertificate,
    MMatrixMode, MMatrixOutcome, MMatrixRejection, LP_ACCEPT_TOL, LP_ETA_MAX,
};
pub use nonlinear::{sphere_rates, sphere_rates_with, verdict_nonlinear, verdict_nonlinear_for_model, SphereCase, SphereRates};
pub use partition::{
    aggregate_generator, build_partition, mode_divergence_note, partition_matrix, verdict_partition, Partition,
    PartitionAggregate, PartitionOptions, DEFAULT_RATE_CAP,
};

use crate::scenario::{TestFunctionSpec, ZeroBehavior};
use crate::VerdictKind;

/// Stability verdict implied by a successful certificate for `ρ`.
pub(crate) fn stability_kind(rho: &TestFunctionSpec) -> VerdictKind {
    match rho.at_zero {
        ZeroBehavior::VanishesOnlyAtZero => VerdictKind::AsymptoticallyStableInProbability,
        ZeroBehavior::BlowsUpAtZero => VerdictKind::UnstableInProbability,
    }
}
