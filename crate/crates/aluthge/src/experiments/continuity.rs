//! Continuity probe of the limit map at a normal matrix.
//!
//! A normal invertible `N₀` is a fixed point, so its limit is itself; the
//! limit map is continuous there, and the modulus-of-continuity curve
//! `m(δ) = max_{‖P‖₂=δ} ‖Δ^∞(N₀+P) − N₀‖₂` must descend to zero with `δ`.
//! No Lipschitz rate is asserted: at degenerate spectra the limit map is
//! continuous but provably not `C¹`, so only the raw curve is reported.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, frobenius_distance, frobenius_norm, CMatrix};
use crate::transform;

use super::ensemble::{matrix_rng, random_sphere_perturbation};

/// Stopping tolerance for the perturbed runs. Much looser than the library
/// default on purpose: a perturbation of size `δ` of a degenerate normal
/// point yields iterates whose normality defect plateaus near `δ²` and then
/// decays at a rate of only `1 − O(δ²)` per step, so a tight stop would run
/// out of budget (and be excluded from the curve) exactly in the regime the
/// probe exists to measure. A `1e-4` stop resolves every practical radius
/// (`δ ≥ 1e-4`) while the limit estimate stays decade-accurate; pass a
/// tighter tolerance through [`continuity_probe_with_params`] when the base
/// spectrum is well separated.
pub const CONTINUITY_TOL: f64 = 1e-4;

/// Iteration budget per perturbed sample.
pub const CONTINUITY_MAX_ITER: usize = 20_000;

/// One perturbed run.
#[derive(Debug, Clone, Serialize)]
pub struct SampleOutcome {
    /// `‖Δ^∞(n0+P) − n0‖₂` (distance of the final iterate when the run did
    /// not converge — recorded for inspection but excluded from the max).
    pub distance: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// The measured modulus-of-continuity curve.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub tol: f64,
    pub max_iter: usize,
    pub deltas: Vec<f64>,
    /// `m(δ)`: max distance over the converged samples at each δ. `NaN`
    /// (serialized as null) if no sample at that δ converged.
    pub m_of_delta: Vec<f64>,
    /// Count of nonconvergent samples per δ.
    pub nonconverged: Vec<usize>,
    pub samples: Vec<Vec<SampleOutcome>>,
}

/// Probe the continuity of the limit map at the normal invertible `n0` with
/// the default tolerance and budget: for each `δ` draw `samples_per_delta`
/// perturbations uniform on the Frobenius sphere of radius `δ` and record
/// `m(δ) = max ‖Δ^∞(n0+P) − n0‖₂` over the converged samples. Nonconvergent
/// samples are flagged and counted, not folded into the max.
pub fn continuity_probe(
    n0: &CMatrix,
    deltas: &[f64],
    samples_per_delta: usize,
    seed: u64,
) -> Result<ContinuityReport> {
    continuity_probe_with_params(
        n0,
        deltas,
        samples_per_delta,
        seed,
        CONTINUITY_TOL,
        CONTINUITY_MAX_ITER,
    )
}

/// [`continuity_probe`] with explicit stopping parameters.
pub fn continuity_probe_with_params(
    n0: &CMatrix,
    deltas: &[f64],
    samples_per_delta: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<ContinuityReport> {
    let r = linalg::check_square(n0)?;
    linalg::check_finite(n0)?;
    let scale = 1.0 + frobenius_norm(n0);
    let defect = linalg::normality_defect(n0)?;
    if defect > 1e-8 * scale {
        return Err(Error::InvalidParameter(format!(
            "base point must be normal (defect {defect:.3e})"
        )));
    }
    let sigma_min = {
        use ndarray_linalg::SVD;
        let (_, s, _) = n0.svd(false, false)?;
        s.iter().fold(f64::INFINITY, |acc, &x| acc.min(x))
    };
    if !(sigma_min > 1e-8 * scale) {
        return Err(Error::NearSingular(format!(
            "base point must be invertible (smallest singular value {sigma_min:.3e}); \
             behavior of the limit map at singular matrices is out of scope"
        )));
    }
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("need at least one delta".into()));
    }
    for pair in deltas.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::InvalidParameter(
                "deltas must be strictly decreasing".into(),
            ));
        }
    }
    if !(deltas[deltas.len() - 1] > 0.0) || deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidParameter(
            "deltas must be positive and finite".into(),
        ));
    }
    if samples_per_delta == 0 {
        return Err(Error::InvalidParameter(
            "samples_per_delta must be positive".into(),
        ));
    }

    let mut m_of_delta = Vec::with_capacity(deltas.len());
    let mut nonconverged = Vec::with_capacity(deltas.len());
    let mut samples = Vec::with_capacity(deltas.len());
    for (di, &delta) in deltas.iter().enumerate() {
        let mut row = Vec::with_capacity(samples_per_delta);
        let mut m = f64::NAN;
        let mut failures = 0usize;
        for si in 0..samples_per_delta {
            let index = (di * samples_per_delta + si) as u64;
            let mut rng = matrix_rng(seed, index);
            let p = random_sphere_perturbation(&mut rng, r, delta);
            let perturbed = n0 + &p;
            let result = transform::limit(&perturbed, 0.5, tol, max_iter)?;
            let distance = frobenius_distance(&result.limit, n0);
            if result.converged {
                m = if m.is_nan() { distance } else { m.max(distance) };
            } else {
                failures += 1;
            }
            row.push(SampleOutcome {
                distance,
                converged: result.converged,
                iterations: result.iterations_used,
            });
        }
        m_of_delta.push(m);
        nonconverged.push(failures);
        samples.push(row);
    }

    Ok(ContinuityReport {
        tol,
        max_iter,
        deltas: deltas.to_vec(),
        m_of_delta,
        nonconverged,
        samples,
    })
}
