//! The transform `Δ_λ`, its iteration, and the limit map `Δ^∞`.
//!
//! For `T = U|T|` the λ-weighted transform is `Δ_λ(T) = |T|^λ U |T|^{1−λ}`.
//! It preserves the characteristic polynomial, never increases the Frobenius
//! norm, fixes exactly the normal matrices, and its iteration converges to a
//! normal matrix with the same eigenvalues. The iteration engine here records
//! per-step diagnostics (norm, excess, normality defect, step size) and stops
//! on a triple criterion: all three of step size, normality defect, and
//! excess must fall below the tolerance. Step size alone can stall in slow
//! non-diagonalizable regimes while the iterate is still far from normal.

use ndarray::Array2;
use ndarray_linalg::SVD;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, c, io::MatrixDoc, CMatrix};

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )))
    }
}

/// Relative level below which a computed singular value is solver noise on a
/// genuine zero. The map annihilates `ker T` exactly, but raising noise of
/// order `ε·σ_max` to a fractional power would smear `O(ε^λ)` spurious mass
/// over the kernel directions of a singular input, so such values are
/// flattened to exact zeros before the powers are taken.
const SIGMA_ZERO_RELATIVE: f64 = 1e-13;

/// `Δ_λ(T) = |T|^λ U |T|^{1−λ}`, computed from a single SVD `T = WΣV*` as
/// `V Σ^λ (V*W) Σ^{1−λ} V*`. Works for singular matrices too: the rightmost
/// factor `Σ^{1−λ}` annihilates `ker T`, so the result does not depend on how
/// the unitary polar factor is extended over the kernel.
pub fn aluthge(t: &CMatrix, lambda: f64) -> Result<CMatrix> {
    linalg::check_square(t)?;
    linalg::check_finite(t)?;
    check_lambda(lambda)?;
    let (w_opt, s, vt_opt) = t.svd(true, true)?;
    let w = w_opt.ok_or_else(|| Error::Backend("SVD returned no left factor".into()))?;
    let vt = vt_opt.ok_or_else(|| Error::Backend("SVD returned no right factor".into()))?;
    let v = linalg::dagger(&vt);
    let sigma_floor = SIGMA_ZERO_RELATIVE * s.iter().fold(0.0_f64, |a, &x| a.max(x));
    let s = s.mapv(|x| if x <= sigma_floor { 0.0 } else { x });
    let s_lo = Array2::from_diag(&s.mapv(|x| c(x.powf(lambda), 0.0)));
    let s_hi = Array2::from_diag(&s.mapv(|x| c(x.powf(1.0 - lambda), 0.0)));
    let core = vt.dot(&w);
    Ok(v.dot(&s_lo).dot(&core).dot(&s_hi).dot(&vt))
}

/// The excess `‖T‖₂² − Σ|λ_i(T)|²`: non-negative, zero exactly for normal
/// matrices, and an upper bound for the squared distance from `T` to the
/// unitary orbit of any normal matrix with the same spectrum.
pub fn excess(t: &CMatrix) -> Result<f64> {
    let vals = linalg::eigenvalues(t)?;
    let power_sum: f64 = vals.iter().map(|z| z.norm_sqr()).sum();
    let norm = linalg::frobenius_norm(t);
    Ok(norm * norm - power_sum)
}

/// Block-diagonal direct sum `a ⊕ b`. The transform acts blockwise on it:
/// `Δ_λ(a ⊕ b) = Δ_λ(a) ⊕ Δ_λ(b)`.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let ra = linalg::check_square(a)?;
    let rb = linalg::check_square(b)?;
    let mut out = linalg::zeros(ra + rb);
    for i in 0..ra {
        for j in 0..ra {
            out[(i, j)] = a[(i, j)];
        }
    }
    for i in 0..rb {
        for j in 0..rb {
            out[(ra + i, ra + j)] = b[(i, j)];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepRecord {
    pub n: usize,
    pub frobenius_norm: f64,
    pub excess: f64,
    pub normality_defect: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ToleranceMet,
    MaxIterations,
    NumericalFailure,
}

fn serialize_matrix<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    MatrixDoc::from_matrix(m).serialize(s)
}

/// Diagnostics of an iteration run. `steps[i]` describes the iterate `Δ^n(T)`
/// (its norm, excess, normality defect) together with the size of the step to
/// `Δ^{n+1}(T)`. Past 10000 stored entries the record set is thinned to every
/// 2^j-th index (stride doubling), which bounds memory on slow runs while
/// keeping log-linear rate fits meaningful; the final state is always kept.
/// `snapshots` holds the matching decimated iterates themselves — rate and
/// projector analyses need distances measured against the limit, which the
/// scalar records alone cannot provide. Snapshots stay in memory and are not
/// serialized.
#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub lambda_param: f64,
    pub steps: Vec<StepRecord>,
    #[serde(skip)]
    pub snapshots: Vec<(usize, CMatrix)>,
    #[serde(rename = "final", serialize_with = "serialize_matrix")]
    pub final_matrix: CMatrix,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl IterationTrace {
    /// Index of the final iterate: the number of transform applications used.
    pub fn iterations_used(&self) -> usize {
        self.snapshots.last().map(|(n, _)| *n).unwrap_or(0)
    }

    /// Delimited table of the per-step diagnostics.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("n,frobenius_norm,excess,normality_defect,step_size\n");
        for rec in &self.steps {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                rec.n, rec.frobenius_norm, rec.excess, rec.normality_defect, rec.step_size
            ));
        }
        out
    }
}

const TRACE_CAP: usize = 10_000;

struct TraceStore {
    steps: Vec<StepRecord>,
    snapshots: Vec<(usize, CMatrix)>,
    stride: usize,
}

impl TraceStore {
    fn new() -> Self {
        TraceStore {
            steps: Vec::new(),
            snapshots: Vec::new(),
            stride: 1,
        }
    }

    fn push(&mut self, rec: StepRecord, matrix: &CMatrix) {
        if rec.n % self.stride == 0 {
            self.steps.push(rec);
            self.snapshots.push((rec.n, matrix.clone()));
            if self.steps.len() > TRACE_CAP {
                self.stride *= 2;
                let stride = self.stride;
                self.steps.retain(|r| r.n % stride == 0);
                self.snapshots.retain(|(n, _)| n % stride == 0);
            }
        }
    }

    /// Record the state where the run stopped even if decimation would skip it.
    fn force(&mut self, rec: StepRecord, n: usize, matrix: &CMatrix) {
        if self.steps.last().map(|r| r.n) != Some(rec.n) {
            self.steps.push(rec);
        }
        if self.snapshots.last().map(|(m, _)| *m) != Some(n) {
            self.snapshots.push((n, matrix.clone()));
        }
    }
}

/// Iterate `Δ_λ` from `t`, recording diagnostics, until step size, normality
/// defect, and excess all drop below `tol` or `max_iter` transform
/// applications have been spent. Numerical breakdown mid-run is recorded in
/// `stop_reason`, not raised; the partial trace stays usable.
///
/// The excess recorded at step `n` is `‖Δ^n(T)‖₂² − Σ|λ_i(T)|²` with the
/// eigenvalue power sum computed once from the input — the eigenvalues are an
/// invariant of the iteration, and this is exactly the quantity whose decay
/// certifies approach to the unitary orbit.
pub fn iterate(t: &CMatrix, lambda: f64, tol: f64, max_iter: usize) -> Result<IterationTrace> {
    linalg::check_square(t)?;
    linalg::check_finite(t)?;
    check_lambda(lambda)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter < 1 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }

    let eig_power_sum: f64 = linalg::eigenvalues(t)?
        .iter()
        .map(|z| z.norm_sqr())
        .sum();

    let mut store = TraceStore::new();
    let mut cur = t.clone();
    let mut n = 0usize;

    let (converged, stop_reason, last_rec) = loop {
        let norm = linalg::frobenius_norm(&cur);
        let defect = linalg::normality_defect(&cur)?;
        let exc = norm * norm - eig_power_sum;

        let next = match aluthge(&cur, lambda) {
            Ok(m) if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => m,
            _ => {
                let rec = StepRecord {
                    n,
                    frobenius_norm: norm,
                    excess: exc,
                    normality_defect: defect,
                    step_size: f64::NAN,
                };
                store.push(rec, &cur);
                break (false, StopReason::NumericalFailure, rec);
            }
        };
        let step = linalg::frobenius_distance(&next, &cur);
        let rec = StepRecord {
            n,
            frobenius_norm: norm,
            excess: exc,
            normality_defect: defect,
            step_size: step,
        };
        store.push(rec, &cur);

        if step < tol && defect < tol && exc < tol {
            break (true, StopReason::ToleranceMet, rec);
        }
        if n == max_iter {
            break (false, StopReason::MaxIterations, rec);
        }
        cur = next;
        n += 1;
    };

    store.force(last_rec, n, &cur);
    Ok(IterationTrace {
        lambda_param: lambda,
        steps: store.steps,
        snapshots: store.snapshots,
        final_matrix: cur,
        converged,
        stop_reason,
    })
}

/// Result of running the iteration to its limit.
#[derive(Debug, Clone, Serialize)]
pub struct LimitResult {
    #[serde(serialize_with = "serialize_matrix")]
    pub limit: CMatrix,
    pub iterations_used: usize,
    pub converged: bool,
    pub trace: Option<IterationTrace>,
}

/// `Δ^∞(T)`: iterate to tolerance. Returns `converged = false` with the
/// partial trace when `max_iter` is exhausted (expected for nearly defective
/// spectra, where convergence is sublinear) — inspect the flag rather than
/// relying on an error.
pub fn limit(t: &CMatrix, lambda: f64, tol: f64, max_iter: usize) -> Result<LimitResult> {
    let trace = iterate(t, lambda, tol, max_iter)?;
    Ok(LimitResult {
        limit: trace.final_matrix.clone(),
        iterations_used: trace.iterations_used(),
        converged: trace.converged,
        trace: Some(trace),
    })
}
