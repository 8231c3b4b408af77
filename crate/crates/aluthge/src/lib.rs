//! The Aluthge transform of a square complex matrix `T = U|T|` (polar
//! decomposition) is `Δ_λ(T) = |T|^λ U |T|^{1−λ}` for `λ ∈ (0,1)`. Its fixed
//! points are exactly the normal matrices, and iterating it drives any matrix
//! to a normal limit `Δ^∞(T)` with the same eigenvalues.
//!
//! This crate implements the transform and the machinery needed to study its
//! dynamics at desk scale (dimensions up to roughly a dozen):
//!
//! - [`linalg`]: dense complex kernels — polar decomposition, Hermitian
//!   fractional powers, eigenvalues, characteristic polynomials, minimal-cost
//!   eigenvalue matching, and the shared matrix file format;
//! - [`transform`]: the transform itself, the iteration engine with per-step
//!   diagnostics, and the limit map;
//! - [`spectral`]: eigenvalue clustering, Riesz spectral projectors (two
//!   independent backends), the retraction `Π_E`, and membership tests for
//!   the sets where the iteration has exact block structure;
//! - [`dynamics`]: the contraction constant `k_D`, the finite-difference
//!   derivative of the transform as a real-linear operator, and its splitting
//!   into neutral and stable invariant subspaces at normal points;
//! - [`experiments`]: random matrix ensembles, convergence-rate fits,
//!   projector-convergence measurements, continuity probes of `Δ^∞`, and a
//!   batch experiment runner with deterministic reports.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod spectral;
pub mod transform;

pub use error::{Error, Result};
pub use linalg::{C64, CMatrix};
