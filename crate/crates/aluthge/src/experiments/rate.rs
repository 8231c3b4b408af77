//! Exponential rate fits: matrix-level distance to the limit, and
//! projector-level distance for slow (non-diagonalizable) spectra.

use serde::Serialize;

use crate::dynamics::k_d;
use crate::error::{Error, Result};
use crate::linalg::{self, frobenius_distance, frobenius_norm, CMatrix, SpectrumInfo};
use crate::spectral;
use crate::transform::{self, IterationTrace};

/// Distances must clear `100·floor` with `floor = 1e-12·(1+‖T‖₂)` to count
/// as signal rather than round-off.
const FLOOR_COEFF: f64 = 1e-12;

/// Minimum number of window points for a meaningful least-squares fit.
const MIN_FIT_POINTS: usize = 8;

/// Iteration budget for the projector-level analysis. Projector distances
/// reach their numerical floor within a few hundred steps even when the
/// matrix-level convergence is sublinear, so this is generous.
const PROJECTION_MAX_ITER: usize = 4000;

/// Projector distance series keep a dense head of this many snapshots plus a
/// uniformly thinned tail before fitting; the contour quadrature per point
/// dominates the cost. The head must be dense because the projector decay
/// completes within the first few hundred steps even when the matrix-level
/// run uses its whole budget — a uniform stride over the full run would step
/// right over it.
const PROJECTION_MAX_POINTS: usize = 400;

/// Result of fitting `d_n ≈ C·γ^n` on a log scale.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    /// `exp(slope)` of the least-squares line on `(n, ln d_n)`. `NaN`
    /// (serialized as null) when the series was constant below tolerance and
    /// there was nothing to fit.
    pub fitted_gamma: f64,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    /// The contraction factor of the matching normal spectrum, when it is
    /// defined (invertible limit); the theoretical prediction for `γ`.
    #[serde(rename = "k_D_reference")]
    pub k_d_reference: Option<f64>,
    /// Root-mean-square vertical deviation of the measured distances from the
    /// fitted line, in decades (base-10 log units): `0.1` means the points
    /// scatter about 26 % around the exponential.
    pub residual: f64,
    /// Whether the series descended to the numerical floor inside the
    /// recorded range (as opposed to running out of iterations first).
    pub floor_reached: bool,
    /// First and last iteration index of the fitted window.
    pub n_range: (usize, usize),
    /// Distance at the last recorded point.
    pub terminal_distance: f64,
}

/// Least squares for `ln d = a + b·n`; returns `(a, b, rms_residual)`.
fn log_line_fit(points: &[(usize, f64)]) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let b = sxy / sxx;
    let a = mean_y - b * mean_x;
    let ss: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (y - (a + b * x)).powi(2))
        .sum();
    (a, b, (ss / m).sqrt())
}

/// The fit window: the last contiguous run of points whose distance lies in
/// `[100·floor, d₀/10]` — early transient and late round-off both excluded.
fn fit_window(points: &[(usize, f64)], floor: f64, d0: f64) -> Vec<(usize, f64)> {
    let lo = 100.0 * floor;
    let hi = d0 / 10.0;
    let mut last_run: Vec<(usize, f64)> = Vec::new();
    let mut current: Vec<(usize, f64)> = Vec::new();
    for &(n, d) in points {
        if d >= lo && d <= hi {
            current.push((n, d));
        } else if !current.is_empty() {
            last_run = std::mem::take(&mut current);
        }
    }
    if !current.is_empty() {
        last_run = current;
    }
    last_run
}

fn build_report(
    points: &[(usize, f64)],
    floor: f64,
    k_d_reference: Option<f64>,
) -> Result<RateReport> {
    let d0 = points.first().map(|&(_, d)| d).unwrap_or(0.0);
    let terminal_distance = points.last().map(|&(_, d)| d).unwrap_or(0.0);
    let window = fit_window(points, floor, d0);
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points in the fit window [{:.3e}, {:.3e}] (need {MIN_FIT_POINTS}); \
             the run is either too short or already at the numerical floor",
            window.len(),
            100.0 * floor,
            d0 / 10.0
        )));
    }
    let (a, b, residual) = log_line_fit(&window);
    Ok(RateReport {
        fitted_gamma: b.exp(),
        fitted_c: a.exp(),
        k_d_reference,
        // The line is fitted in natural log (γ = exp(slope)); the quality
        // figure is reported in decades, the conventional unit for log-scale
        // scatter.
        residual: residual / std::f64::consts::LN_10,
        floor_reached: terminal_distance < 100.0 * floor,
        n_range: (window[0].0, window[window.len() - 1].0),
        terminal_distance,
    })
}

/// Fit the exponential approach `‖Δ^n(T) − limit‖₂ ≈ C·γ^n` from a converged
/// iteration trace.
///
/// The window is the last contiguous run of recorded iterates whose distance
/// lies in `[100·floor, d₀/10]`, `floor = 1e-12·(1+‖T‖₂)`; at least 8 points
/// are required, otherwise [`Error::InsufficientData`] — in particular a
/// normal input, whose distances start below the floor, yields that error
/// rather than a vacuous fit. The reference contraction factor is computed
/// from the spectrum of `limit` when that spectrum admits one.
pub fn rate_fit(trace: &IterationTrace, limit: &CMatrix) -> Result<RateReport> {
    if !trace.converged {
        let last_step = trace
            .steps
            .last()
            .map(|r| r.step_size)
            .unwrap_or(f64::NAN);
        return Err(Error::NotConverged {
            max_iter: trace.iterations_used(),
            last_step,
        });
    }
    if trace.snapshots.is_empty() {
        return Err(Error::InsufficientData("trace has no snapshots".into()));
    }
    linalg::check_square(limit)?;
    let floor = FLOOR_COEFF * (1.0 + frobenius_norm(&trace.snapshots[0].1));
    let points: Vec<(usize, f64)> = trace
        .snapshots
        .iter()
        .map(|(n, m)| (*n, frobenius_distance(m, limit)))
        .collect();
    let k_ref = linalg::eigenvalues(limit)
        .ok()
        .and_then(|vals| k_d(&vals).ok());
    build_report(&points, floor, k_ref)
}

/// Projector-level convergence: iterate from `t` and measure
/// `d^E_n = max_i ‖E_i(Δ^n(t)) − E_i(Δ^N(t))‖₂` against the last iterate's
/// projectors, then fit the exponential. This is the meaningful rate for
/// non-diagonalizable `t`, where matrix-level convergence can be sublinear
/// while the projectors still converge exponentially.
///
/// `t` must lie in the matched-rank set of `reference` (projector ranks equal
/// to the reference multiplicities). Projectors along the trace are computed
/// by the quadrature backend alone — iterates drift arbitrarily close to
/// defective, where the eigenvector backend has no meaning. The final
/// snapshot supplies the reference projectors and is excluded from the
/// measured series (its own distance is zero by construction); the reported
/// terminal distance is therefore the last genuine measurement. When the
/// series is constant below `tol` from the start (block-orthogonal inputs,
/// whose projectors the iteration preserves exactly) there is no line to fit:
/// the report carries `fitted_gamma = NaN`, zero residual and
/// `floor_reached`.
pub fn projection_convergence(
    t: &CMatrix,
    reference: &SpectrumInfo,
    tol: f64,
) -> Result<RateReport> {
    if !spectral::in_m_lambda(t, reference) {
        return Err(Error::InvalidParameter(
            "matrix is not in the matched-rank set of the reference spectrum".into(),
        ));
    }
    let trace = transform::iterate(t, 0.5, tol, PROJECTION_MAX_ITER)?;
    let snapshots = &trace.snapshots;
    // The last snapshot is the reference itself: its distance is identically
    // zero and is left out of the series.
    let usable = snapshots.len().saturating_sub(1);
    let head = usable.min(PROJECTION_MAX_POINTS);
    let tail_stride = (usable - head).div_ceil(PROJECTION_MAX_POINTS).max(1);
    let thinned: Vec<&(usize, CMatrix)> = snapshots[..usable]
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < head || (*i - head) % tail_stride == 0 || *i + 1 == usable)
        .map(|(_, s)| s)
        .collect();

    let final_projs = spectral::contour_projections(&trace.final_matrix, reference)?;
    let mut points: Vec<(usize, f64)> = Vec::with_capacity(thinned.len());
    for (n, m) in thinned {
        let projs = spectral::contour_projections(m, reference)?;
        let d = projs
            .iter()
            .zip(final_projs.iter())
            .map(|(a, b)| frobenius_distance(a, b))
            .fold(0.0, f64::max);
        points.push((*n, d));
    }

    let floor = FLOOR_COEFF * (1.0 + frobenius_norm(t));
    let max_d = points.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    if points.is_empty() || max_d <= tol {
        // Constant projectors: the invariant-subspace structure is already
        // exact and preserved step by step.
        let last_n = points.last().map(|&(n, _)| n).unwrap_or(0);
        return Ok(RateReport {
            fitted_gamma: f64::NAN,
            fitted_c: max_d,
            k_d_reference: k_d(&reference.lambda).ok(),
            residual: 0.0,
            floor_reached: true,
            n_range: (0, last_n),
            terminal_distance: points.last().map(|&(_, d)| d).unwrap_or(0.0),
        });
    }
    build_report(&points, floor, k_d(&reference.lambda).ok())
}
