//! Local dynamics of the transform around its fixed points.
//!
//! The fixed points of the transform are exactly the normal matrices. Around
//! an invertible normal point `N` the map behaves like a partial contraction:
//! the derivative has a neutral eigenvalue group at `1` (directions along the
//! fixed-point manifold and the commutant) and a stable group contracted by
//! at least the spectrum-dependent factor `k_D < 1`. This module computes the
//! finite-difference derivative operator in realified coordinates, splits its
//! neutral and stable invariant subspaces via a resolvent projector, and
//! builds the analytic tangent frames (similarity-orbit directions and
//! commutant directions) those subspaces should match.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, SVD};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c, frobenius_norm, sv_range_basis, zeros, C64, CMatrix};
use crate::spectral::{resolvent_projector_with, ProjectionSystem};
use crate::transform;

/// Contraction factor of the stable directions at a normal matrix with the
/// given eigenvalues: the maximum over pairs of distinct eigenvalues of
/// `|phase_i + phase_j| · √(|d_i||d_j|) / (|d_i| + |d_j|)`, always in
/// `[0, 1)`. Eigenvalues closer than `1e-9·(1 + max|d|)` are treated as
/// equal, so a spectrum without distinct pairs (e.g. a scalar matrix) yields
/// `0`. Zero eigenvalues are rejected: the factor is defined for invertible
/// normal matrices.
pub fn k_d(spectrum: &[C64]) -> Result<f64> {
    if spectrum.is_empty() {
        return Ok(0.0);
    }
    let max_mod = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let same_tol = 1e-9 * (1.0 + max_mod);
    let mut k = 0.0_f64;
    for (i, &di) in spectrum.iter().enumerate() {
        let mi = di.norm();
        if mi == 0.0 {
            return Err(Error::InvalidParameter(
                "spectrum contains a zero eigenvalue; the contraction factor \
                 is defined for invertible normal matrices"
                    .into(),
            ));
        }
        for &dj in &spectrum[i + 1..] {
            if (di - dj).norm() <= same_tol {
                continue;
            }
            let mj = dj.norm();
            if mj == 0.0 {
                return Err(Error::InvalidParameter(
                    "spectrum contains a zero eigenvalue; the contraction factor \
                     is defined for invertible normal matrices"
                        .into(),
                ));
            }
            let phase_sum = (di / mi + dj / mj).norm();
            k = k.max(phase_sum * (mi * mj).sqrt() / (mi + mj));
        }
    }
    Ok(k)
}

/// Realified coordinates of an `r×r` complex matrix: the first `r²` entries
/// are the real parts row-major, the next `r²` the imaginary parts.
pub fn coords(m: &CMatrix) -> Array1<f64> {
    let r = m.nrows();
    let rr = r * r;
    let mut v = Array1::zeros(2 * rr);
    for p in 0..r {
        for q in 0..r {
            v[p * r + q] = m[[p, q]].re;
            v[rr + p * r + q] = m[[p, q]].im;
        }
    }
    v
}

/// Inverse of [`coords`].
pub fn uncoords(v: &Array1<f64>, r: usize) -> CMatrix {
    let rr = r * r;
    debug_assert_eq!(v.len(), 2 * rr);
    let mut m = zeros(r);
    for p in 0..r {
        for q in 0..r {
            m[[p, q]] = c(v[p * r + q], v[rr + p * r + q]);
        }
    }
    m
}

/// The derivative of the transform at a base point, as a real linear
/// operator on the realified matrix space `R^{2r²}`.
#[derive(Debug, Clone)]
pub struct DerivativeOperator {
    /// `2r²`.
    pub dimension: usize,
    /// The operator in [`coords`] coordinates, column `j` being the image of
    /// the `j`-th coordinate direction.
    pub matrix: Array2<f64>,
    pub base_point: CMatrix,
    /// The central-difference step that was used.
    pub fd_step: f64,
}

impl DerivativeOperator {
    /// Apply the linearized map to a direction matrix.
    pub fn apply(&self, direction: &CMatrix) -> Result<CMatrix> {
        let r = self.base_point.nrows();
        if direction.dim() != (r, r) {
            return Err(Error::DimensionMismatch(format!(
                "direction is {:?} but the base point is {r}x{r}",
                direction.dim()
            )));
        }
        Ok(uncoords(&self.matrix.dot(&coords(direction)), r))
    }
}

/// Derivative of the (λ = 1/2) transform at `t` by central differences,
/// one coordinate direction per column.
///
/// The step defaults to `1e-5·(1 + ‖t‖₂)`. The base point must be invertible
/// with margin: the smallest singular value has to exceed twice the step so
/// that every sample point stays safely in the invertible set, where the
/// polar decomposition (and hence the transform) is smooth.
pub fn numerical_derivative(t: &CMatrix, fd_step: Option<f64>) -> Result<DerivativeOperator> {
    let r = linalg::check_square(t)?;
    linalg::check_finite(t)?;
    let h = fd_step.unwrap_or_else(|| 1e-5 * (1.0 + frobenius_norm(t)));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    let (_, s, _) = t.svd(false, false)?;
    let sigma_min = s.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
    if !(sigma_min > 2.0 * h) {
        return Err(Error::NearSingular(format!(
            "smallest singular value {sigma_min:.3e} does not clear twice the \
             difference step {h:.3e}; the derivative is only defined at \
             invertible points"
        )));
    }

    let d = 2 * r * r;
    let columns: Vec<Array1<f64>> = (0..d)
        .into_par_iter()
        .map(|j| -> Result<Array1<f64>> {
            let mut e = Array1::zeros(d);
            e[j] = 1.0;
            let direction = uncoords(&e, r);
            let plus = transform::aluthge(&(t + &(&direction * c(h, 0.0))), 0.5)?;
            let minus = transform::aluthge(&(t - &(&direction * c(h, 0.0))), 0.5)?;
            Ok((coords(&plus) - coords(&minus)) / (2.0 * h))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut matrix = Array2::zeros((d, d));
    for (j, col) in columns.iter().enumerate() {
        matrix.column_mut(j).assign(col);
    }

    Ok(DerivativeOperator {
        dimension: d,
        matrix,
        base_point: t.clone(),
        fd_step: h,
    })
}

/// Invariant splitting of the derivative at a fixed point.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// Orthonormal direction matrices spanning the neutral subspace
    /// (eigenvalue group at 1).
    pub neutral_basis: Vec<CMatrix>,
    /// Orthonormal direction matrices spanning the stable subspace.
    pub stable_basis: Vec<CMatrix>,
    pub neutral_dim: usize,
    pub stable_dim: usize,
    /// Operator norm of the derivative restricted to the stable subspace —
    /// the guaranteed one-step contraction of transversal perturbations.
    pub stable_contraction: f64,
}

/// Default width of the neutral eigenvalue group around 1.
pub const NEUTRAL_GROUP_DELTA: f64 = 0.02;

/// Split the derivative's invariant subspaces with the default neutral-group
/// width. `k_bound` is an upper bound for the stable eigenvalue moduli —
/// at a normal base point, the [`k_d`] of its spectrum.
pub fn split_subspaces(op: &DerivativeOperator, k_bound: f64) -> Result<SubspaceSplit> {
    split_subspaces_with(op, k_bound, NEUTRAL_GROUP_DELTA)
}

/// Split the derivative's invariant subspaces.
///
/// The eigenvalues of the operator must fall into two groups: a neutral
/// group within `δ` of `1` and a stable group of modulus at most
/// `k_bound + δ`, where `δ = min(delta, (1 − k_bound)/3)` so the groups
/// cannot overlap however close `k_bound` is to 1. Any eigenvalue in neither
/// group aborts with [`Error::NoSeparation`]. The neutral projector is then
/// computed by resolvent quadrature on a circle around 1 placed at the
/// geometric mean of the neutral spread and the stable gap, and orthonormal
/// bases of its range and kernel are extracted from singular vectors.
pub fn split_subspaces_with(
    op: &DerivativeOperator,
    k_bound: f64,
    delta: f64,
) -> Result<SubspaceSplit> {
    if !(0.0..1.0).contains(&k_bound) {
        return Err(Error::InvalidParameter(format!(
            "stable modulus bound must lie in [0, 1), got {k_bound}"
        )));
    }
    if k_bound >= 1.0 - 1e-4 {
        return Err(Error::NoSeparation(format!(
            "stable modulus bound {k_bound} is too close to 1 for the neutral \
             and stable groups to be told apart numerically"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "group width must be positive and finite, got {delta}"
        )));
    }
    let d = op.dimension;
    let delta_eff = delta.min((1.0 - k_bound) / 3.0);

    let (eigvals, _) = op.matrix.eig()?;
    let mut neutral_vals: Vec<C64> = Vec::new();
    let mut stable_vals: Vec<C64> = Vec::new();
    let mut offenders: Vec<C64> = Vec::new();
    for &lam in eigvals.iter() {
        if (lam - c(1.0, 0.0)).norm() <= delta_eff {
            neutral_vals.push(lam);
        } else if lam.norm() <= k_bound + delta_eff {
            stable_vals.push(lam);
        } else {
            offenders.push(lam);
        }
    }
    if !offenders.is_empty() {
        let shown: Vec<String> = offenders.iter().take(6).map(|z| format!("{z:.6}")).collect();
        return Err(Error::NoSeparation(format!(
            "{} eigenvalue(s) fall outside both the neutral disk |λ−1| ≤ {delta_eff:.3e} \
             and the stable disk |λ| ≤ {:.6}: {}",
            offenders.len(),
            k_bound + delta_eff,
            shown.join(", ")
        )));
    }

    if stable_vals.is_empty() {
        // Nothing transversal to contract: the whole space is neutral.
        let neutral_basis = (0..d)
            .map(|j| {
                let mut e = Array1::zeros(d);
                e[j] = 1.0;
                uncoords(&e, op.base_point.nrows())
            })
            .collect();
        return Ok(SubspaceSplit {
            neutral_basis,
            stable_basis: Vec::new(),
            neutral_dim: d,
            stable_dim: 0,
            stable_contraction: 0.0,
        });
    }

    let spread = neutral_vals
        .iter()
        .map(|z| (z - c(1.0, 0.0)).norm())
        .fold(0.0, f64::max)
        .max(1e-8);
    let gap = stable_vals
        .iter()
        .map(|z| (z - c(1.0, 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    if !(spread < gap) {
        return Err(Error::NoSeparation(format!(
            "neutral spread {spread:.3e} reaches the stable gap {gap:.3e}"
        )));
    }
    let radius = (spread * gap).sqrt();

    let promoted = op.matrix.mapv(|x| c(x, 0.0));
    let projector = resolvent_projector_with(&promoted, c(1.0, 0.0), radius, 128)?;

    // The operator is real and both eigenvalue groups are conjugation
    // symmetric, so the projector must come out real; a visible imaginary
    // part (or broken idempotence) means the quadrature failed.
    let imag_residue = projector.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let scale = 1.0 + frobenius_norm(&projector);
    if imag_residue > 1e-6 * scale {
        return Err(Error::Backend(format!(
            "neutral projector has imaginary residue {imag_residue:.3e}"
        )));
    }
    let idem = linalg::frobenius_distance(&projector.dot(&projector), &projector);
    if idem > 1e-6 * scale {
        return Err(Error::Backend(format!(
            "neutral projector fails idempotence by {idem:.3e}"
        )));
    }
    let p_re: Array2<f64> = projector.mapv(|z| z.re);

    let r = op.base_point.nrows();
    let neutral_frame = real_range_frame(&p_re)?;
    if neutral_frame.ncols() != neutral_vals.len() {
        return Err(Error::Backend(format!(
            "neutral projector rank {} disagrees with the eigenvalue count {}",
            neutral_frame.ncols(),
            neutral_vals.len()
        )));
    }
    let complement = Array2::<f64>::eye(d) - &p_re;
    let stable_frame = real_range_frame(&complement)?;
    if stable_frame.ncols() != stable_vals.len() {
        return Err(Error::Backend(format!(
            "stable projector rank {} disagrees with the eigenvalue count {}",
            stable_frame.ncols(),
            stable_vals.len()
        )));
    }

    // The stable frame spans an invariant subspace, so compressing onto it
    // in orthonormal coordinates *is* the restriction of the operator.
    let compressed = stable_frame.t().dot(&op.matrix).dot(&stable_frame);
    let (_, s, _) = compressed.svd(false, false)?;
    let stable_contraction = s.iter().fold(0.0, |acc: f64, &x| acc.max(x));

    Ok(SubspaceSplit {
        neutral_basis: frame_columns(&neutral_frame, r),
        stable_basis: frame_columns(&stable_frame, r),
        neutral_dim: neutral_frame.ncols(),
        stable_dim: stable_frame.ncols(),
        stable_contraction,
    })
}

/// Orthonormal basis (as columns) for the dominant range of a real
/// projector-like matrix, thresholding singular values at 1/2.
fn real_range_frame(m: &Array2<f64>) -> Result<Array2<f64>> {
    let (u, s, _) = m.svd(true, false)?;
    let u = u.expect("left singular vectors requested");
    let keep = s.iter().filter(|&&x| x > 0.5).count();
    Ok(u.slice(ndarray::s![.., ..keep]).to_owned())
}

fn frame_columns(frame: &Array2<f64>, r: usize) -> Vec<CMatrix> {
    (0..frame.ncols())
        .map(|j| uncoords(&frame.column(j).to_owned(), r))
        .collect()
}

/// Orthonormal frames for the ranges of each projector in the system,
/// validated to be orthogonal projectors within `tol`.
fn orthogonal_frames(system: &ProjectionSystem, tol: f64) -> Result<Vec<CMatrix>> {
    if system.orthogonality_defect > tol {
        return Err(Error::NotOrthogonal(system.orthogonality_defect));
    }
    system
        .projectors
        .iter()
        .zip(system.ranks.iter())
        .map(|(e, &rank)| {
            let frame = sv_range_basis(e, 0.5)?;
            if frame.ncols() != rank {
                return Err(Error::Backend(format!(
                    "projector range dimension {} disagrees with recorded rank {rank}",
                    frame.ncols()
                )));
            }
            Ok(frame)
        })
        .collect()
}

fn check_base_point(n: &CMatrix, system: &ProjectionSystem, tol: f64) -> Result<usize> {
    let r = linalg::check_square(n)?;
    if system.projectors.is_empty() || system.projectors[0].nrows() != r {
        return Err(Error::DimensionMismatch(
            "projection system does not match the matrix dimension".into(),
        ));
    }
    let commutation = system.commutation_defect(n);
    let scale = 1.0 + frobenius_norm(n);
    if commutation > tol * scale {
        return Err(Error::InvalidParameter(format!(
            "the projection system does not commute with the base point \
             (defect {commutation:.3e}); it must be the point's own spectral system"
        )));
    }
    Ok(r)
}

/// Rank-one direction matrices `u v*` and `i·u v*` over frame pairs, taking
/// either the cross-block pairs (`i ≠ j`) or the same-block pairs (`i = j`).
fn frame_directions(frames: &[CMatrix], cross: bool) -> Vec<CMatrix> {
    let mut out = Vec::new();
    for (i, fi) in frames.iter().enumerate() {
        for (j, fj) in frames.iter().enumerate() {
            if (i != j) != cross {
                continue;
            }
            for a in 0..fi.ncols() {
                for b in 0..fj.ncols() {
                    let u = fi.column(a);
                    let v = fj.column(b);
                    let mut m = zeros(u.len());
                    for p in 0..u.len() {
                        for q in 0..v.len() {
                            m[[p, q]] = u[p] * v[q].conj();
                        }
                    }
                    let rotated = m.mapv(|z| z * c(0.0, 1.0));
                    out.push(m);
                    out.push(rotated);
                }
            }
        }
    }
    out
}

/// Orthonormal basis of the tangent space to the similarity orbit of a
/// normal matrix `n`, transversal to its commutant: the rank-one directions
/// `u v*` and `i·u v*` with `u`, `v` drawn from eigenframes of *different*
/// spectral blocks. Its real dimension is `2(r² − Σᵢ rᵢ²)` for block ranks
/// `rᵢ`. The system must consist of orthogonal projectors (defect ≤ `tol`)
/// commuting with `n`.
pub fn tangent_basis_orbit(
    n: &CMatrix,
    system: &ProjectionSystem,
    tol: f64,
) -> Result<Vec<CMatrix>> {
    check_base_point(n, system, tol)?;
    let frames = orthogonal_frames(system, tol)?;
    Ok(frame_directions(&frames, true))
}

/// Orthonormal basis of the commutant of the projector system: the rank-one
/// directions `u v*` and `i·u v*` with `u`, `v` drawn from the *same*
/// spectral block. Its real dimension is `2 Σᵢ rᵢ²`. Directions in this
/// space connect normal matrices to normal matrices, so the transform fixes
/// them to first order.
pub fn commutant_basis(
    n: &CMatrix,
    system: &ProjectionSystem,
    tol: f64,
) -> Result<Vec<CMatrix>> {
    check_base_point(n, system, tol)?;
    let frames = orthogonal_frames(system, tol)?;
    Ok(frame_directions(&frames, false))
}

/// Principal angles (radians, ascending) between the real spans of two
/// families of direction matrices. Both families must already be orthonormal
/// in the realified inner product `Re tr(b* a)` — as all bases produced by
/// this module are — which is validated before the cosines are read off the
/// singular values of the cross-Gram matrix.
pub fn principal_angles(a: &[CMatrix], b: &[CMatrix]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter(
            "principal angles need two non-empty direction families".into(),
        ));
    }
    let r = a[0].nrows();
    let d = 2 * r * r;
    let pack = |fam: &[CMatrix]| -> Result<Array2<f64>> {
        let mut m = Array2::zeros((d, fam.len()));
        for (j, dir) in fam.iter().enumerate() {
            if dir.dim() != (r, r) {
                return Err(Error::DimensionMismatch(
                    "direction families mix matrix dimensions".into(),
                ));
            }
            m.column_mut(j).assign(&coords(dir));
        }
        let gram_dev = {
            let g = m.t().dot(&m) - Array2::<f64>::eye(fam.len());
            g.iter().fold(0.0, |acc: f64, &x| acc.max(x.abs()))
        };
        if gram_dev > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "direction family is not orthonormal (Gram deviation {gram_dev:.3e})"
            )));
        }
        Ok(m)
    };
    let ma = pack(a)?;
    let mb = pack(b)?;
    let cross = ma.t().dot(&mb);
    let (_, s, _) = cross.svd(false, false)?;
    let mut angles: Vec<f64> = s.iter().map(|&x| x.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}
