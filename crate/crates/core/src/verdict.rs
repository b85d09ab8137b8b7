//! Verdicts and the certificates that back them.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::certificates::{FredholmCertificate, MMatrixCertificate, MMatrixMode, PartitionAggregate, SphereRates};
use crate::spectral::EigenCertificate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    AsymptoticallyStableInProbability,
    UnstableInProbability,
    PositiveRecurrent,
    Recurrent,
    Transient,
    Inconclusive,
}

impl VerdictKind {
    pub fn is_conclusive(self) -> bool {
        self != Self::Inconclusive
    }

    /// Whether the verdict is about the equilibrium (as opposed to recurrence).
    pub fn is_stability(self) -> bool {
        matches!(self, Self::AsymptoticallyStableInProbability | Self::UnstableInProbability)
    }

    /// Two conclusive verdicts on the same question that cannot both hold.
    pub fn contradicts(self, other: Self) -> bool {
        use VerdictKind::*;
        matches!(
            (self, other),
            (AsymptoticallyStableInProbability, UnstableInProbability)
                | (UnstableInProbability, AsymptoticallyStableInProbability)
                | (PositiveRecurrent | Recurrent, Transient)
                | (Transient, PositiveRecurrent | Recurrent)
        )
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The criterion a verdict invokes, serialized under its wire name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    /// Averaging of `β` against the invariant measure.
    #[serde(rename = "thm_2_1")]
    Fredholm,
    /// `-(Q + diag β̄)` is a nonsingular M-matrix.
    #[serde(rename = "thm_2_2")]
    MMatrix,
    /// Sphere rates of power-law coefficients.
    #[serde(rename = "thm_2_3")]
    Nonlinear,
    /// Finite aggregation of a countable regime space.
    #[serde(rename = "thm_2_4")]
    Partition,
    /// Principal eigenvalue, finite regime space, stability.
    #[serde(rename = "thm_3_1")]
    SpectralStabilityFinite,
    /// Principal eigenvalue, countable regime space, stability.
    #[serde(rename = "thm_3_2")]
    SpectralStabilityCountable,
    /// Principal eigenvalue, finite regime space, recurrence.
    #[serde(rename = "thm_4_1")]
    SpectralRecurrenceFinite,
    /// Principal eigenvalue or test-function bound, countable regime space, recurrence.
    #[serde(rename = "thm_4_2")]
    SpectralRecurrenceCountable,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Self::Fredholm,
        Self::MMatrix,
        Self::Nonlinear,
        Self::Partition,
        Self::SpectralStabilityFinite,
        Self::SpectralStabilityCountable,
        Self::SpectralRecurrenceFinite,
        Self::SpectralRecurrenceCountable,
    ];

    pub fn wire_name(self) -> &'static str {
        match self {
            Self::Fredholm => "thm_2_1",
            Self::MMatrix => "thm_2_2",
            Self::Nonlinear => "thm_2_3",
            Self::Partition => "thm_2_4",
            Self::SpectralStabilityFinite => "thm_3_1",
            Self::SpectralStabilityCountable => "thm_3_2",
            Self::SpectralRecurrenceFinite => "thm_4_1",
            Self::SpectralRecurrenceCountable => "thm_4_2",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// Sphere-rate witness: the averaged rates on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearCertificate {
    pub rates: SphereRates,
    pub mu: Vec<f64>,
    /// `Σ μ_i β_i`.
    pub weighted_beta: f64,
    /// `Σ μ_i β̃_i`.
    pub weighted_beta_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionCertificate {
    pub aggregate: PartitionAggregate,
    pub matrix: Vec<Vec<f64>>,
    /// Present when the M-matrix test accepted.
    pub mmatrix: Option<MMatrixCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    Fredholm(FredholmCertificate),
    MMatrix(MMatrixCertificate),
    Nonlinear(NonlinearCertificate),
    Partition(PartitionCertificate),
    Eigen(EigenCertificate),
}

/// Outcome of one criterion, with the witness that supports it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub verdict: VerdictKind,
    pub theorem: Criterion,
    pub certificate: Option<Certificate>,
    pub mode: Option<MMatrixMode>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(verdict: VerdictKind, theorem: Criterion, certificate: Option<Certificate>) -> Self {
        Self { verdict, theorem, certificate, mode: None, notes: Vec::new() }
    }

    pub fn inconclusive(theorem: Criterion, reason: impl Into<String>) -> Self {
        Self::new(VerdictKind::Inconclusive, theorem, None).with_note(reason)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn with_mode(mut self, mode: MMatrixMode) -> Self {
        self.mode = Some(mode);
        self
    }

    pub fn is_conclusive(&self) -> bool {
        self.verdict.is_conclusive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_names_round_trip() {
        for c in Criterion::ALL {
            let s = serde_json::to_string(&c).unwrap();
            assert_eq!(s, format!("\"{}\"", c.wire_name()));
            assert_eq!(serde_json::from_str::<Criterion>(&s).unwrap(), c);
        }
    }

    #[test]
    fn contradictions() {
        use VerdictKind::*;
        assert!(AsymptoticallyStableInProbability.contradicts(UnstableInProbability));
        assert!(Recurrent.contradicts(Transient));
        assert!(!Recurrent.contradicts(PositiveRecurrent));
        assert!(!Inconclusive.contradicts(Transient));
        assert!(!AsymptoticallyStableInProbability.contradicts(Recurrent));
    }

    #[test]
    fn verdict_json_shape() {
        let v = Verdict::inconclusive(Criterion::MMatrix, "first minor is 0");
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["verdict"], "Inconclusive");
        assert_eq!(json["theorem"], "thm_2_2");
        assert!(json["certificate"].is_null());
        assert_eq!(json["notes"][0], "first minor is 0");
    }
}
