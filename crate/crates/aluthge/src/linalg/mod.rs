//! Dense complex matrix kernels.
//!
//! Everything here works on square `Array2<Complex64>` values of modest size
//! (a dozen rows at most). The norm written `‖·‖₂` throughout this crate is
//! the Frobenius norm induced by the real inner product `⟨A,B⟩ = Re tr(B*A)`;
//! operator norms (largest singular value) are always named explicitly.

mod assign;
pub mod io;

pub use assign::{min_cost_assignment, multiset_distance};

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMatrix = Array2<C64>;

/// Default tolerance for predicates and validation, relative to `1 + ‖·‖₂`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Shorthand complex constructor, mostly for building test matrices.
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(r: usize) -> CMatrix {
    Array2::eye(r)
}

pub fn zeros(r: usize) -> CMatrix {
    Array2::zeros((r, r))
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().map(|z| z.conj())
}

pub fn check_square(m: &CMatrix) -> Result<usize> {
    let (rows, cols) = m.dim();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

pub fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// The real inner product `Re tr(b* a)` that makes the matrix space a real
/// Euclidean space of dimension `2r²`.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "inner product of {:?} with {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (y.conj() * x).re)
        .sum())
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    let (_, s, _) = a.svd(false, false)?;
    Ok(s.iter().fold(0.0, |acc: f64, &x| acc.max(x)))
}

/// Ratio of extreme singular values; infinite when the matrix is singular.
pub fn condition_2(a: &CMatrix) -> Result<f64> {
    let (_, s, _) = a.svd(false, false)?;
    let max = s.iter().fold(0.0, |acc: f64, &x| acc.max(x));
    let min = s.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
    if min <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(max / min)
    }
}

/// Rank by singular-value thresholding at `tol·‖m‖₂`.
pub fn sv_rank(m: &CMatrix, tol: f64) -> Result<usize> {
    let (_, s, _) = m.svd(false, false)?;
    let threshold = tol * frobenius_norm(m);
    Ok(s.iter().filter(|&&x| x > threshold).count())
}

/// Orthonormal basis for the dominant range of `m`: the left singular
/// vectors with singular value strictly above `sigma_threshold` (absolute),
/// as the columns of a tall matrix. For a projector, whose singular values
/// split into a group ≥ 1 and a group near 0, threshold `0.5` extracts an
/// orthonormal basis of the range.
pub fn sv_range_basis(m: &CMatrix, sigma_threshold: f64) -> Result<CMatrix> {
    let (u, s, _) = m.svd(true, false)?;
    let u = u.expect("left singular vectors requested");
    let keep = s.iter().filter(|&&x| x > sigma_threshold).count();
    Ok(u.slice(ndarray::s![.., ..keep]).to_owned())
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    check_square(m).is_ok() && frobenius_distance(m, &dagger(m)) <= tol * (1.0 + frobenius_norm(m))
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    match check_square(m) {
        Ok(r) => {
            frobenius_distance(&dagger(m).dot(m), &identity(r))
                <= tol * (1.0 + frobenius_norm(m))
        }
        Err(_) => false,
    }
}

/// `‖T T* − T* T‖₂`; zero exactly when `T` is normal.
pub fn normality_defect(t: &CMatrix) -> Result<f64> {
    check_square(t)?;
    let td = dagger(t);
    Ok(frobenius_distance(&t.dot(&td), &td.dot(t)))
}

/// Normality predicate. The commutator `TT* − T*T` scales like `‖T‖²`, so the
/// tolerance is applied against `(1 + ‖T‖₂)²`.
pub fn is_normal(t: &CMatrix, tol: f64) -> bool {
    match normality_defect(t) {
        Ok(d) => {
            let scale = 1.0 + frobenius_norm(t);
            d <= tol * scale * scale
        }
        Err(_) => false,
    }
}

pub fn is_psd(m: &CMatrix, tol: f64) -> bool {
    if !is_hermitian(m, tol) {
        return false;
    }
    let h = m.map(|z| *z) * c(0.5, 0.0) + dagger(m) * c(0.5, 0.0);
    match h.eigh(UPLO::Lower) {
        Ok((w, _)) => {
            let scale = 1.0 + frobenius_norm(m);
            w.iter().all(|&x| x >= -tol * scale)
        }
        Err(_) => false,
    }
}

/// Polar factors `T = U·|T|` with `U` unitary and `|T| = (T*T)^{1/2}`.
pub struct PolarFactors {
    pub unitary: CMatrix,
    pub modulus: CMatrix,
}

/// Polar decomposition through the SVD: from `T = WΣV*`, take `U = WV*` and
/// `|T| = VΣV*`. For invertible `T` this is the unique unitary polar factor;
/// for singular `T` it is a canonical unitary extension (the transform built
/// on it is independent of the choice, since `|T|` annihilates `ker T`).
pub fn polar_decompose(t: &CMatrix) -> Result<PolarFactors> {
    check_square(t)?;
    check_finite(t)?;
    let (w_opt, s, vt_opt) = t.svd(true, true)?;
    let w = w_opt.ok_or_else(|| Error::Backend("SVD returned no left factor".into()))?;
    let vt = vt_opt.ok_or_else(|| Error::Backend("SVD returned no right factor".into()))?;
    let unitary = w.dot(&vt);
    let v = dagger(&vt);
    let sigma = Array2::from_diag(&s.mapv(|x| c(x, 0.0)));
    let modulus = v.dot(&sigma).dot(&vt);
    Ok(PolarFactors {
        unitary,
        modulus: hermitize(&modulus),
    })
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + &dagger(m)) * c(0.5, 0.0)
}

/// The bound Hermitian eigensolver can hand back the eigenvectors of the
/// *conjugate* matrix for complex input (eigenvalues are unaffected: they are
/// real and conjugation-invariant). Decide by residual whether the returned
/// basis or its entrywise conjugate diagonalizes `h`, and return that one.
fn oriented_eigenbasis(h: &CMatrix, w: &Array1<f64>, v: CMatrix) -> CMatrix {
    let wc = Array2::from_diag(&w.mapv(|x| c(x, 0.0)));
    let residual = |basis: &CMatrix| frobenius_distance(&h.dot(basis), &basis.dot(&wc));
    let conjugated = v.mapv(|z| z.conj());
    if residual(&conjugated) < residual(&v) {
        conjugated
    } else {
        v
    }
}

/// `p^s` for Hermitian positive semidefinite `p` and `s ∈ (0, 1]`, via the
/// spectral decomposition. Round-off eigenvalues slightly below zero are
/// clamped to zero; anything indefinite beyond tolerance is rejected.
pub fn herm_power(p: &CMatrix, s: f64) -> Result<CMatrix> {
    herm_power_with(p, s, DEFAULT_TOL)
}

pub fn herm_power_with(p: &CMatrix, s: f64, tol: f64) -> Result<CMatrix> {
    check_square(p)?;
    check_finite(p)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent must lie in (0, 1], got {s}"
        )));
    }
    let scale = 1.0 + frobenius_norm(p);
    if frobenius_distance(p, &dagger(p)) > tol * scale {
        return Err(Error::InvalidParameter(
            "matrix is not Hermitian within tolerance".into(),
        ));
    }
    if s == 1.0 {
        return Ok(p.clone());
    }
    let h = hermitize(p);
    let (w, v) = h.eigh(UPLO::Lower)?;
    let v = oriented_eigenbasis(&h, &w, v);
    let mut powered = Array1::zeros(w.len());
    for (i, &x) in w.iter().enumerate() {
        if x < -tol * scale {
            return Err(Error::InvalidParameter(format!(
                "matrix is indefinite (eigenvalue {x:.3e})"
            )));
        }
        powered[i] = c(x.max(0.0).powf(s), 0.0);
    }
    let vd = dagger(&v);
    let result = v.dot(&Array2::from_diag(&powered)).dot(&vd);
    Ok(hermitize(&result))
}

/// Eigenvalues with multiplicity, canonically ordered: lexicographic by
/// (real, imaginary) after rounding at `1e-9` relative resolution, ties
/// broken by exact comparison so the order is total and deterministic.
pub fn eigenvalues(t: &CMatrix) -> Result<Vec<C64>> {
    check_square(t)?;
    check_finite(t)?;
    let (vals, _) = t.eig()?;
    let mut out: Vec<C64> = vals.to_vec();
    canonical_sort(&mut out);
    Ok(out)
}

/// Raw eigenpairs (unsorted), with the eigenvector matrix whose columns match
/// the eigenvalue order returned by the solver.
pub fn eigen_pairs(t: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    check_square(t)?;
    check_finite(t)?;
    let (vals, vecs) = t.eig()?;
    Ok((vals.to_vec(), vecs))
}

fn canonical_cmp(a: &C64, b: &C64, q: f64) -> std::cmp::Ordering {
    let ka = ((a.re / q).round() as i64, (a.im / q).round() as i64);
    let kb = ((b.re / q).round() as i64, (b.im / q).round() as i64);
    ka.cmp(&kb)
        .then(a.re.total_cmp(&b.re))
        .then(a.im.total_cmp(&b.im))
}

fn canonical_quantum(vals: &[C64]) -> f64 {
    let scale = 1.0 + vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
    1e-9 * scale
}

/// Sort complex values into the canonical order: lexicographic by
/// (real, imaginary) after rounding at `1e-9` relative resolution, ties
/// broken by exact comparison so the order is total and deterministic.
pub fn canonical_sort(vals: &mut [C64]) {
    let q = canonical_quantum(vals);
    vals.sort_by(|a, b| canonical_cmp(a, b, q));
}

/// The permutation that puts `vals` into canonical order: `out[k]` is the
/// index into `vals` of the `k`-th smallest value.
pub fn canonical_order(vals: &[C64]) -> Vec<usize> {
    let q = canonical_quantum(vals);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| canonical_cmp(&vals[i], &vals[j], q));
    order
}

/// Monic characteristic polynomial coefficients, degree-descending
/// (`[1, c₁, …, c_r]` with `det(xI − T) = Σ c_k x^{r−k}`), computed by the
/// trace recursion `M₀ = I`, `c_k = −tr(T·M_{k−1})/k`, `M_k = T·M_{k−1} + c_k I`
/// — independent of any eigenvalue solver.
pub fn char_poly(t: &CMatrix) -> Result<Vec<C64>> {
    let r = check_square(t)?;
    check_finite(t)?;
    let mut coeffs = Vec::with_capacity(r + 1);
    coeffs.push(c(1.0, 0.0));
    let mut m = identity(r);
    for k in 1..=r {
        let tm = t.dot(&m);
        let tr: C64 = (0..r).map(|i| tm[(i, i)]).sum();
        let ck = -tr / (k as f64);
        coeffs.push(ck);
        m = tm + identity(r) * ck;
    }
    Ok(coeffs)
}

/// Eigenvalue structure of a matrix: the full multiset, the distinct cluster
/// centers, their multiplicities, and the separation radius `ε_μ` (one third
/// of the minimal center gap; `None` means there is a single cluster and the
/// radius is effectively infinite).
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectrumInfo {
    pub lambda: Vec<C64>,
    pub mu: Vec<C64>,
    pub multiplicities: Vec<usize>,
    pub epsilon_mu: Option<f64>,
}

impl SpectrumInfo {
    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn r(&self) -> usize {
        self.lambda.len()
    }

    /// Radius of the disks around each center that make up the admissible
    /// region. With a single cluster the one-third rule is vacuous and the
    /// disk radius falls back to `1 + |μ₁|`.
    pub fn omega_radius(&self) -> f64 {
        self.epsilon_mu.unwrap_or(1.0 + self.mu[0].norm())
    }
}
