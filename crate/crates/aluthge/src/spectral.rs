//! Eigenvalue clustering and Riesz spectral projectors.
//!
//! For a matrix whose eigenvalues fall into well-separated clusters around
//! centers `μ_1..μ_k`, the Riesz projector `E_i` is the idempotent commuting
//! with the matrix that projects onto the invariant subspace of cluster `i`,
//! generally oblique (non-selfadjoint). Two independent backends compute it:
//! grouping eigenvectors, and trapezoid quadrature of the resolvent on a
//! circle around the center. The backends must agree whenever the
//! eigenvector matrix is numerically invertible; for defective matrices only
//! the quadrature route is meaningful and is used alone.
//!
//! On top of the projectors sit the retraction `Π_E(T) = Σ μ_i E_i(T)`, the
//! compression onto the block-diagonal commutant algebra, and membership
//! tests for the sets where the iteration of the transform has exact block
//! structure (matching cluster ranks; orthogonal projectors).

use ndarray::{Array1, Array2};
use ndarray_linalg::Inverse;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, condition_2, dagger, eigen_pairs, frobenius_distance, frobenius_norm, identity,
    multiset_distance, sv_rank, zeros, C64, CMatrix, SpectrumInfo, DEFAULT_TOL,
};

/// Trapezoid nodes for the resolvent quadrature. On a circle separating the
/// clusters by the one-third rule the error ratio per node is at most ~1/3,
/// so 64 nodes saturate double precision with a wide margin.
pub const CONTOUR_NODES: usize = 64;

/// Entrywise disagreement between the two projector backends beyond this
/// limit is an error: silently wrong projectors would corrupt every
/// downstream membership and rate result.
pub const BACKEND_AGREEMENT_LIMIT: f64 = 1e-6;

/// Above this eigenvector-matrix condition number the eigenvector-grouping
/// backend is unreliable by construction (defective or nearly defective
/// input) and the cross-check is skipped.
pub const EIGEN_BACKEND_COND_CAP: f64 = 1e6;

/// Tolerance for matching an eigenvalue multiset against a reference,
/// relative to the reference scale.
const MULTISET_MATCH_TOL: f64 = 1e-6;

/// Merge eigenvalues into clusters with the default threshold
/// `1e-8·(1 + max|λ|)`.
pub fn cluster_spectrum(lambda_vec: &[C64]) -> Result<SpectrumInfo> {
    let scale = 1.0 + lambda_vec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    cluster_spectrum_with(lambda_vec, 1e-8 * scale)
}

/// Merge eigenvalues closer than `merge_threshold` into one cluster
/// (single linkage: clusters are connected components of the proximity
/// graph, so chains merge transitively). Centers are cluster means; the
/// separation radius `ε_μ` is one third of the minimal center gap; a single
/// cluster gets the infinite-radius sentinel.
pub fn cluster_spectrum_with(lambda_vec: &[C64], merge_threshold: f64) -> Result<SpectrumInfo> {
    if lambda_vec.is_empty() {
        return Err(Error::InvalidParameter("empty eigenvalue vector".into()));
    }
    if !(merge_threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "merge threshold must be non-negative, got {merge_threshold}"
        )));
    }
    let n = lambda_vec.len();
    let mut component = vec![usize::MAX; n];
    let mut k = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = k;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if component[j] == usize::MAX
                    && (lambda_vec[i] - lambda_vec[j]).norm() <= merge_threshold
                {
                    component[j] = k;
                    stack.push(j);
                }
            }
        }
        k += 1;
    }

    let mut centers = vec![c(0.0, 0.0); k];
    let mut sizes = vec![0usize; k];
    for (i, &z) in lambda_vec.iter().enumerate() {
        centers[component[i]] += z;
        sizes[component[i]] += 1;
    }
    for i in 0..k {
        centers[i] /= sizes[i] as f64;
    }

    let order = linalg::canonical_order(&centers);
    let mu: Vec<C64> = order.iter().map(|&i| centers[i]).collect();
    let multiplicities: Vec<usize> = order.iter().map(|&i| sizes[i]).collect();

    let epsilon_mu = if k == 1 {
        None
    } else {
        let mut min_gap = f64::INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                min_gap = min_gap.min((mu[i] - mu[j]).norm());
            }
        }
        Some(min_gap / 3.0)
    };

    let mut lambda = lambda_vec.to_vec();
    linalg::canonical_sort(&mut lambda);
    Ok(SpectrumInfo {
        lambda,
        mu,
        multiplicities,
        epsilon_mu,
    })
}

/// An ordered system of spectral projectors for the clusters of a matrix.
#[derive(Debug, Clone)]
pub struct ProjectionSystem {
    pub projectors: Vec<CMatrix>,
    pub centers: Vec<C64>,
    pub ranks: Vec<usize>,
    /// `max_i ‖E_i − E_i*‖₂` — zero exactly when the system is orthogonal.
    pub orthogonality_defect: f64,
}

impl ProjectionSystem {
    pub fn k(&self) -> usize {
        self.projectors.len()
    }

    pub fn idempotence_defect(&self) -> f64 {
        self.projectors
            .iter()
            .map(|e| frobenius_distance(&e.dot(e), e))
            .fold(0.0, f64::max)
    }

    pub fn completeness_defect(&self) -> f64 {
        let r = self.projectors[0].nrows();
        let mut sum = zeros(r);
        for e in &self.projectors {
            sum += e;
        }
        frobenius_distance(&sum, &identity(r))
    }

    pub fn disjointness_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, ei) in self.projectors.iter().enumerate() {
            for (j, ej) in self.projectors.iter().enumerate() {
                if i != j {
                    worst = worst.max(frobenius_norm(&ei.dot(ej)));
                }
            }
        }
        worst
    }

    /// `max_i ‖E_i T − T E_i‖₂` for the matrix the system was computed from.
    pub fn commutation_defect(&self, t: &CMatrix) -> f64 {
        self.projectors
            .iter()
            .map(|e| frobenius_distance(&e.dot(t), &t.dot(e)))
            .fold(0.0, f64::max)
    }

    /// The retraction `Σ μ_i E_i`.
    pub fn retraction(&self) -> CMatrix {
        let r = self.projectors[0].nrows();
        let mut out = zeros(r);
        for (e, &mu) in self.projectors.iter().zip(self.centers.iter()) {
            out = out + e * mu;
        }
        out
    }
}

fn check_compatible(t: &CMatrix, info: &SpectrumInfo) -> Result<usize> {
    let r = linalg::check_square(t)?;
    linalg::check_finite(t)?;
    if info.r() != r {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {r}x{r} but the spectrum reference has {} eigenvalues",
            info.r()
        )));
    }
    Ok(r)
}

/// Map each value to its nearest center, requiring it to lie inside the
/// admissible disk.
fn assign_to_centers(vals: &[C64], info: &SpectrumInfo) -> Result<Vec<usize>> {
    let radius = info.omega_radius();
    vals.iter()
        .map(|&z| {
            let (best, dist) = info
                .mu
                .iter()
                .enumerate()
                .map(|(i, &mu)| (i, (z - mu).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one center");
            if dist <= radius {
                Ok(best)
            } else {
                Err(Error::SpectrumEscape(format!(
                    "eigenvalue {z} is {dist:.3e} away from the nearest center \
                     {} (admissible radius {radius:.3e})",
                    info.mu[best]
                )))
            }
        })
        .collect()
}

/// Riesz projector of `t` for the disk around `center` of the given radius,
/// by trapezoid quadrature of `(1/2πi)∮(zI − t)^{-1} dz` with
/// [`CONTOUR_NODES`] nodes.
pub fn resolvent_projector(t: &CMatrix, center: C64, radius: f64) -> Result<CMatrix> {
    resolvent_projector_with(t, center, radius, CONTOUR_NODES)
}

/// [`resolvent_projector`] with an explicit node count, for contours whose
/// separation ratio is tighter than the spectral-cluster case.
pub fn resolvent_projector_with(
    t: &CMatrix,
    center: C64,
    radius: f64,
    nodes: usize,
) -> Result<CMatrix> {
    let r = linalg::check_square(t)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "contour radius must be positive and finite, got {radius}"
        )));
    }
    if nodes < 4 {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs at least 4 nodes, got {nodes}"
        )));
    }
    let mut e = zeros(r);
    for j in 0..nodes {
        let theta = 2.0 * std::f64::consts::PI * (j as f64) / (nodes as f64);
        let w = C64::from_polar(1.0, theta);
        let z = center + w * radius;
        let shifted = identity(r) * z - t;
        let resolvent = shifted.inv()?;
        e = e + resolvent * (w * radius / nodes as f64);
    }
    Ok(e)
}

/// Quadrature backend: one resolvent contour per cluster. Well defined for
/// defective matrices too, as long as no eigenvalue sits near a contour.
pub fn contour_projections(t: &CMatrix, info: &SpectrumInfo) -> Result<Vec<CMatrix>> {
    let r = check_compatible(t, info)?;
    if info.k() == 1 {
        return Ok(vec![identity(r)]);
    }
    let radius = info.omega_radius();
    info.mu
        .iter()
        .map(|&mu| resolvent_projector(t, mu, radius))
        .collect()
}

fn grouped_projectors(
    vals: &[C64],
    v: &CMatrix,
    info: &SpectrumInfo,
) -> Result<Vec<CMatrix>> {
    let assignment = assign_to_centers(vals, info)?;
    let v_inv = v.inv()?;
    Ok((0..info.k())
        .map(|i| {
            let sel = Array2::from_diag(&Array1::from_iter(
                assignment
                    .iter()
                    .map(|&a| if a == i { c(1.0, 0.0) } else { c(0.0, 0.0) }),
            ));
            v.dot(&sel).dot(&v_inv)
        })
        .collect())
}

/// Eigenvector backend: group the columns of the eigenvector matrix by
/// cluster and form `E_i = V 1_i V^{-1}`. Also returns the condition number
/// of `V`. Refuses near-defective input (condition beyond
/// [`EIGEN_BACKEND_COND_CAP`]), where the construction is meaningless.
pub fn eigen_projections(t: &CMatrix, info: &SpectrumInfo) -> Result<(Vec<CMatrix>, f64)> {
    check_compatible(t, info)?;
    let (vals, v) = eigen_pairs(t)?;
    let cond = condition_2(&v)?;
    if !(cond < EIGEN_BACKEND_COND_CAP) {
        return Err(Error::NearSingular(format!(
            "eigenvector matrix condition {cond:.3e} exceeds {EIGEN_BACKEND_COND_CAP:.1e}"
        )));
    }
    let projectors = grouped_projectors(&vals, &v, info)?;
    Ok((projectors, cond))
}

/// Spectral projectors of `t` for the clusters of `info`, cross-checked
/// between the two backends.
///
/// Every eigenvalue of `t` must lie in the admissible region (within the
/// separation radius of some center). When the eigenvector matrix is
/// numerically invertible (condition below [`EIGEN_BACKEND_COND_CAP`]) the
/// eigenvector-grouping result must agree entrywise with the quadrature
/// result within [`BACKEND_AGREEMENT_LIMIT`], or an error is raised; past
/// that conditioning the grouping backend has no meaning and the quadrature
/// result stands alone. The quadrature projectors are the ones returned.
pub fn spectral_projections(t: &CMatrix, info: &SpectrumInfo) -> Result<ProjectionSystem> {
    let r = check_compatible(t, info)?;
    if info.k() == 1 {
        // Nothing to separate: completeness forces the identity.
        return Ok(ProjectionSystem {
            projectors: vec![identity(r)],
            centers: info.mu.clone(),
            ranks: vec![r],
            orthogonality_defect: 0.0,
        });
    }

    let (vals, v) = eigen_pairs(t)?;
    assign_to_centers(&vals, info)?;

    let contour = contour_projections(t, info)?;

    let cond = condition_2(&v)?;
    if cond < EIGEN_BACKEND_COND_CAP {
        let eigen = grouped_projectors(&vals, &v, info)?;
        let difference = contour
            .iter()
            .zip(eigen.iter())
            .map(|(a, b)| frobenius_distance(a, b))
            .fold(0.0, f64::max);
        if difference > BACKEND_AGREEMENT_LIMIT {
            return Err(Error::BackendDisagreement {
                difference,
                limit: BACKEND_AGREEMENT_LIMIT,
            });
        }
    }

    let ranks = contour
        .iter()
        .map(|e| sv_rank(e, DEFAULT_TOL))
        .collect::<Result<Vec<_>>>()?;
    let orthogonality_defect = contour
        .iter()
        .map(|e| frobenius_distance(e, &dagger(e)))
        .fold(0.0, f64::max);

    Ok(ProjectionSystem {
        projectors: contour,
        centers: info.mu.clone(),
        ranks,
        orthogonality_defect,
    })
}

/// The retraction `Π_E(t) = Σ μ_i E_i(t)`. It fixes every diagonalizable
/// matrix whose eigenvalues are exactly the centers with the right
/// multiplicities, and in general differs from `t` by a nilpotent-like part
/// whose spectral radius stays below the separation radius.
pub fn pi_e(t: &CMatrix, info: &SpectrumInfo) -> Result<CMatrix> {
    Ok(spectral_projections(t, info)?.retraction())
}

/// Does `t` lie in the reference's admissible set with the reference cluster
/// ranks? (Eigenvalues inside the separation disks, and each projector rank
/// equal to the reference multiplicity.) Any failure to compute projectors
/// counts as a "no".
pub fn in_m_lambda(t: &CMatrix, reference: &SpectrumInfo) -> bool {
    match spectral_projections(t, reference) {
        Ok(system) => system.ranks == reference.multiplicities,
        Err(_) => false,
    }
}

/// Verdict on membership in the orthogonal-projector set of a reference
/// spectrum, together with the retraction of the tested matrix.
#[derive(Debug, Clone, Serialize)]
pub struct OdMembership {
    pub is_member: bool,
    pub defect: f64,
    #[serde(skip)]
    pub projected: CMatrix,
}

/// Membership test for the set where the spectral projectors are orthogonal:
/// the eigenvalue multiset must match the reference and the orthogonality
/// defect of the projector system must fall below `tol`. On that set the
/// retraction `Π_E` is normal and the iteration converges to it blockwise.
///
/// Errors only when the projectors cannot be computed at all (spectrum
/// escaping the reference region, backend breakdown); a computable system
/// that merely fails the membership conditions yields `is_member = false`.
pub fn in_o_d(t: &CMatrix, reference: &SpectrumInfo, tol: f64) -> Result<OdMembership> {
    let system = spectral_projections(t, reference)?;
    let vals = linalg::eigenvalues(t)?;
    let ref_scale = 1.0
        + reference
            .lambda
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
    let spectrum_matches =
        multiset_distance(&vals, &reference.lambda)? <= MULTISET_MATCH_TOL * ref_scale;
    let defect = system.orthogonality_defect;
    let projected = system.retraction();

    Ok(OdMembership {
        is_member: spectrum_matches && defect < tol,
        defect,
        projected,
    })
}

/// Compression onto the commutant algebra of the system: `Σ_i E_i t E_i`,
/// the block-diagonal part of `t` with respect to the cluster decomposition.
/// Idempotent as a map; fixes `t` exactly when `t` commutes with every `E_i`.
pub fn block_diagonal_part(t: &CMatrix, system: &ProjectionSystem) -> Result<CMatrix> {
    let r = linalg::check_square(t)?;
    if system.projectors.is_empty() || system.projectors[0].nrows() != r {
        return Err(Error::DimensionMismatch(
            "projection system does not match the matrix dimension".into(),
        ));
    }
    let mut out = zeros(r);
    for e in &system.projectors {
        out = out + e.dot(t).dot(e);
    }
    Ok(out)
}
