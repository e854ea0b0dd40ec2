//! Complex-valued torsion invariants for finite graded complexes and flat
//! bundles over the circle.
//!
//! The crate has four layers:
//!
//! * [`linalg`] — dense complex linear algebra: LU determinants, rank/kernel
//!   computations, a Hessenberg-QR eigenvalue solver and generalized
//!   eigenspaces of defective (non-diagonalizable) matrices.
//! * [`torsion`] — finite graded cochain complexes equipped with a
//!   non-degenerate *symmetric* (not Hermitian) bilinear form, the torsion of
//!   the determinant-line isomorphism, and the equivalent spectral route
//!   through the generalized eigenspaces of the Laplacian `Δ = dd♯ + d♯d`.
//! * [`circle`] — rank-`k` flat bundles over `S¹` given by trig-polynomial
//!   connection and bilinear-form data: monodromy, the explicit
//!   non-selfadjoint Laplacians, Fourier–Galerkin spectra, the closed-form
//!   zeta-regularized determinant, Kamber–Tondeur integrals and the analytic
//!   torsion for a choice of coEuler structure.
//! * [`combinatorial`] — the combinatorial side: Morse complex of the circle,
//!   Euler structures, Lefschetz zeta functions of mapping tori, Poincaré
//!   duality on `S¹`, and the relative torsion comparing both sides.
//!
//! All computations are deterministic pure functions over immutable inputs.
//! The crate is `no_std`-compatible (requires `alloc`).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod circle;
pub mod combinatorial;
pub mod error;
pub mod linalg;
pub mod scalar;
pub mod torsion;

pub use error::TorsionError;
pub use num_complex::Complex64;

/// Default relative tolerance for rank decisions, cluster separation and
/// invariant validation. Suitable for well-conditioned double-precision
/// instances of desk scale.
pub const DEFAULT_TOL: f64 = 1e-8;
