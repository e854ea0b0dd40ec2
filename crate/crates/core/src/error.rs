//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors reported by the torsion computations.
///
/// Every variant carries a stable machine-readable code, see
/// [`TorsionError::code`].
#[derive(Debug, Clone, PartialEq)]
pub enum TorsionError {
    /// A bilinear form failed to be invertible (or became numerically
    /// degenerate on an eigenspace where the theory guarantees
    /// non-degeneracy).
    SingularForm(String),
    /// An operation that needs an acyclic complex (`det(A-1) ≠ 0`, no
    /// cohomology) was invoked on a non-acyclic input.
    NotAcyclic,
    /// The requested contour radius passes through (or excludes the zero
    /// cluster of) the spectrum of the Laplacian.
    ContourOnSpectrum(String),
    /// Eigenvalue clusters could not be separated at the requested
    /// tolerance; the caller must adjust it.
    ClusterAmbiguous(String),
    /// The adaptive ODE integrator failed its step control or self-check.
    IntegrationDiverged(String),
    /// The Lefschetz zeta function has a pole or zero of its defining
    /// determinants at the requested parameter.
    ZetaPole,
    /// The differentials do not square to zero.
    NotAComplex { degree: i32 },
    /// Structurally invalid input: shape mismatches, empty data, violated
    /// schema invariants.
    InvalidInput(String),
}

impl TorsionError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            TorsionError::SingularForm(_) => "SINGULAR_FORM",
            TorsionError::NotAcyclic => "NOT_ACYCLIC",
            TorsionError::ContourOnSpectrum(_) => "CONTOUR_ON_SPECTRUM",
            TorsionError::ClusterAmbiguous(_) => "CLUSTER_AMBIGUOUS",
            TorsionError::IntegrationDiverged(_) => "INTEGRATION_DIVERGED",
            TorsionError::ZetaPole => "ZETA_POLE",
            TorsionError::NotAComplex { .. } => "NOT_A_COMPLEX",
            TorsionError::InvalidInput(_) => "VALIDATION_ERROR",
        }
    }
}

impl fmt::Display for TorsionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorsionError::SingularForm(detail) => write!(f, "singular bilinear form: {detail}"),
            TorsionError::NotAcyclic => write!(f, "input is not acyclic"),
            TorsionError::ContourOnSpectrum(detail) => {
                write!(f, "contour radius invalid: {detail}")
            }
            TorsionError::ClusterAmbiguous(detail) => {
                write!(f, "eigenvalue clusters ambiguous: {detail}")
            }
            TorsionError::IntegrationDiverged(detail) => {
                write!(f, "ODE integration diverged: {detail}")
            }
            TorsionError::ZetaPole => write!(f, "zeta determinant vanishes at this parameter"),
            TorsionError::NotAComplex { degree } => {
                write!(f, "d_squared_nonzero at degree {degree}")
            }
            TorsionError::InvalidInput(detail) => write!(f, "invalid input: {detail}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TorsionError {}
