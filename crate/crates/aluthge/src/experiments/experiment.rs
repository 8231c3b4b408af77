//! Batch experiment runner: generation → iteration → analyses → report.
//!
//! A config document lists seeded ensembles and the analyses to run on each.
//! Matrices are processed in parallel, each on its own deterministic RNG
//! stream, and per-matrix failures are recorded in the report rather than
//! aborting the batch. Reports are byte-identical across runs of the same
//! config except for the timestamp field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::dynamics;
use crate::error::{Error, Result};
use crate::linalg::{self, frobenius_norm, multiset_distance, CMatrix};
use crate::spectral;
use crate::transform::{self, StopReason};

use super::ensemble::{generate, EnsembleKind, EnsembleSpec};
use super::rate::{projection_convergence, rate_fit, RateReport};

/// Per-matrix analyses beyond the always-on iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Exponential fit of the distance to the limit.
    Rate,
    /// Projector system of the limit: cluster count, ranks, defects.
    Spectral,
    /// Derivative splitting at the limit: dimensions and stable contraction.
    Dynamics,
    /// Projector-level convergence rate along the iteration.
    ProjectionRate,
}

/// One named ensemble with its requested analyses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleTask {
    pub name: String,
    pub spec: EnsembleSpec,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
}

fn default_lambda() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    100_000
}

/// Experiment configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    pub ensembles: Vec<EnsembleTask>,
}

/// Spectral-projector diagnostics of the limit matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralRecord {
    pub clusters: usize,
    pub ranks: Vec<usize>,
    pub orthogonality_defect: f64,
    pub idempotence_defect: f64,
    pub completeness_defect: f64,
    pub disjointness_defect: f64,
    pub commutation_defect: f64,
}

/// Derivative-splitting diagnostics at the limit matrix.
#[derive(Debug, Clone, Serialize)]
pub struct DynamicsRecord {
    #[serde(rename = "k_D")]
    pub k_d: f64,
    pub neutral_dim: usize,
    pub stable_dim: usize,
    pub expected_neutral_dim: usize,
    pub expected_stable_dim: usize,
    pub stable_contraction: f64,
}

/// Everything measured for one matrix of an ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixRecord {
    pub index: usize,
    pub converged: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub initial_normality_defect: f64,
    pub final_normality_defect: f64,
    /// Largest matched eigenvalue displacement between input and limit —
    /// the iteration must preserve the spectrum.
    pub eigenvalue_drift: f64,
    /// Whether the recorded Frobenius norms were non-increasing.
    pub norm_monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projection_rate: Option<RateReport>,
    /// Analysis failures, recorded instead of aborting the batch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Suite-level statistics over one ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregates {
    pub count: usize,
    pub converged: usize,
    pub nonconverged: usize,
    /// Max final normality defect among converged runs (null when none).
    pub max_final_defect: Option<f64>,
    pub max_eigenvalue_drift: Option<f64>,
    pub norm_monotone_all: bool,
    pub max_fitted_gamma: Option<f64>,
    /// Max of `fitted_gamma − k_D` over rate fits with a reference (the
    /// theoretical prediction is that this stays near or below zero).
    pub max_gamma_excess: Option<f64>,
    pub analysis_errors: usize,
    /// Whether this ensemble is one where convergence within budget is
    /// required (diagonalizable classes with contraction factor ≤ 0.99).
    pub convergence_required: bool,
    /// `true` when no required convergence was missed.
    pub required_ok: bool,
}

/// Report section for one ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub name: String,
    pub aggregates: Aggregates,
    pub matrices: Vec<MatrixRecord>,
}

/// Full experiment report.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Unix seconds; the only field allowed to differ between identical runs.
    pub generated_at: u64,
    pub ensembles: Vec<EnsembleReport>,
    /// `false` when any ensemble missed a required convergence.
    pub passed: bool,
}

fn note_error(slot: &mut Option<String>, label: &str, err: impl std::fmt::Display) {
    let msg = format!("{label}: {err}");
    match slot {
        Some(existing) => {
            existing.push_str("; ");
            existing.push_str(&msg);
        }
        None => *slot = Some(msg),
    }
}

fn analyze_matrix(
    index: usize,
    t: &CMatrix,
    task: &EnsembleTask,
    config: &ExperimentConfig,
) -> MatrixRecord {
    let mut record = MatrixRecord {
        index,
        converged: false,
        iterations: 0,
        stop_reason: StopReason::NumericalFailure,
        initial_norm: frobenius_norm(t),
        final_norm: f64::NAN,
        initial_normality_defect: f64::NAN,
        final_normality_defect: f64::NAN,
        eigenvalue_drift: f64::NAN,
        norm_monotone: false,
        rate: None,
        spectral: None,
        dynamics: None,
        projection_rate: None,
        error: None,
    };

    let trace = match transform::iterate(t, config.lambda, config.tol, config.max_iter) {
        Ok(trace) => trace,
        Err(err) => {
            note_error(&mut record.error, "iterate", err);
            return record;
        }
    };
    let limit = trace.final_matrix.clone();
    record.converged = trace.converged;
    record.iterations = trace.iterations_used();
    record.stop_reason = trace.stop_reason;
    record.final_norm = frobenius_norm(&limit);
    if let Some(first) = trace.steps.first() {
        record.initial_normality_defect = first.normality_defect;
    }
    match linalg::normality_defect(&limit) {
        Ok(d) => record.final_normality_defect = d,
        Err(err) => note_error(&mut record.error, "final defect", err),
    }
    let slack = 1e-10 * (1.0 + record.initial_norm);
    record.norm_monotone = trace
        .steps
        .windows(2)
        .all(|w| w[1].frobenius_norm <= w[0].frobenius_norm + slack);
    match (linalg::eigenvalues(t), linalg::eigenvalues(&limit)) {
        (Ok(a), Ok(b)) => match multiset_distance(&a, &b) {
            Ok(d) => record.eigenvalue_drift = d,
            Err(err) => note_error(&mut record.error, "eigenvalue drift", err),
        },
        (Err(err), _) | (_, Err(err)) => note_error(&mut record.error, "eigenvalues", err),
    }

    for analysis in &task.analyses {
        match analysis {
            Analysis::Rate => match rate_fit(&trace, &limit) {
                Ok(report) => record.rate = Some(report),
                Err(err) => note_error(&mut record.error, "rate", err),
            },
            Analysis::Spectral => {
                let result = linalg::eigenvalues(&limit)
                    .and_then(|vals| spectral::cluster_spectrum(&vals))
                    .and_then(|info| {
                        spectral::spectral_projections(&limit, &info).map(|sys| (info, sys))
                    });
                match result {
                    Ok((_, sys)) => {
                        record.spectral = Some(SpectralRecord {
                            clusters: sys.k(),
                            ranks: sys.ranks.clone(),
                            orthogonality_defect: sys.orthogonality_defect,
                            idempotence_defect: sys.idempotence_defect(),
                            completeness_defect: sys.completeness_defect(),
                            disjointness_defect: sys.disjointness_defect(),
                            commutation_defect: sys.commutation_defect(&limit),
                        });
                    }
                    Err(err) => note_error(&mut record.error, "spectral", err),
                }
            }
            Analysis::Dynamics => {
                if !record.converged {
                    note_error(
                        &mut record.error,
                        "dynamics",
                        "skipped: iteration did not converge to a fixed point",
                    );
                    continue;
                }
                let result = (|| -> Result<DynamicsRecord> {
                    let vals = linalg::eigenvalues(&limit)?;
                    let k = dynamics::k_d(&vals)?;
                    let info = spectral::cluster_spectrum(&vals)?;
                    let r = limit.nrows();
                    let sq_sum: usize = info.multiplicities.iter().map(|m| m * m).sum();
                    let op = dynamics::numerical_derivative(&limit, None)?;
                    let split = dynamics::split_subspaces(&op, k)?;
                    Ok(DynamicsRecord {
                        k_d: k,
                        neutral_dim: split.neutral_dim,
                        stable_dim: split.stable_dim,
                        expected_neutral_dim: r * r + sq_sum,
                        expected_stable_dim: r * r - sq_sum,
                        stable_contraction: split.stable_contraction,
                    })
                })();
                match result {
                    Ok(rec) => record.dynamics = Some(rec),
                    Err(err) => note_error(&mut record.error, "dynamics", err),
                }
            }
            Analysis::ProjectionRate => {
                let result = linalg::eigenvalues(t)
                    .and_then(|vals| spectral::cluster_spectrum(&vals))
                    .and_then(|info| projection_convergence(t, &info, config.tol));
                match result {
                    Ok(report) => record.projection_rate = Some(report),
                    Err(err) => note_error(&mut record.error, "projection_rate", err),
                }
            }
        }
    }
    record
}

/// Is convergence within budget a hard requirement for this ensemble?
/// Diagonalizable classes converge exponentially whenever the contraction
/// factor of the target spectrum stays clear of 1; defective (Jordan)
/// classes are only guaranteed sublinear decay and perturbed ensembles have
/// no prescribed exact spectrum, so neither carries the requirement.
fn convergence_required(spec: &EnsembleSpec) -> bool {
    match spec.kind {
        EnsembleKind::PrescribedSpectrumDiagonalizable | EnsembleKind::Normal => spec
            .spectrum
            .as_deref()
            .and_then(|s| dynamics::k_d(s).ok())
            .map(|k| k <= 0.99)
            .unwrap_or(false),
        EnsembleKind::JordanStructured | EnsembleKind::PerturbedNormal => false,
    }
}

fn aggregate(records: &[MatrixRecord], required: bool) -> Aggregates {
    let converged = records.iter().filter(|r| r.converged).count();
    let max_final_defect = records
        .iter()
        .filter(|r| r.converged && r.final_normality_defect.is_finite())
        .map(|r| r.final_normality_defect)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let max_eigenvalue_drift = records
        .iter()
        .filter(|r| r.eigenvalue_drift.is_finite())
        .map(|r| r.eigenvalue_drift)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let gammas: Vec<f64> = records
        .iter()
        .filter_map(|r| r.rate.as_ref())
        .map(|rate| rate.fitted_gamma)
        .filter(|g| g.is_finite())
        .collect();
    let max_fitted_gamma = gammas.iter().copied().fold(None, |acc: Option<f64>, g| {
        Some(acc.map_or(g, |a| a.max(g)))
    });
    let max_gamma_excess = records
        .iter()
        .filter_map(|r| r.rate.as_ref())
        .filter_map(|rate| rate.k_d_reference.map(|k| rate.fitted_gamma - k))
        .filter(|x| x.is_finite())
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
    Aggregates {
        count: records.len(),
        converged,
        nonconverged: records.len() - converged,
        max_final_defect,
        max_eigenvalue_drift,
        norm_monotone_all: records.iter().all(|r| r.norm_monotone),
        max_fitted_gamma,
        max_gamma_excess,
        analysis_errors: records.iter().filter(|r| r.error.is_some()).count(),
        convergence_required: required,
        required_ok: !required || converged == records.len(),
    }
}

/// Run the experiment described by `config`: generate every ensemble,
/// iterate each matrix, run the requested analyses, and aggregate.
/// Per-matrix failures are recorded in the report; only config-level
/// problems (bad specs, bad parameters) abort. Deterministic for a fixed
/// config modulo `generated_at`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if !(config.lambda > 0.0 && config.lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must lie in (0, 1), got {}",
            config.lambda
        )));
    }
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "tolerance must be positive and max_iter at least 1".into(),
        ));
    }
    if config.ensembles.is_empty() {
        return Err(Error::InvalidParameter(
            "config lists no ensembles".into(),
        ));
    }

    let mut reports = Vec::with_capacity(config.ensembles.len());
    for task in &config.ensembles {
        let matrices = generate(&task.spec)?;
        let records: Vec<MatrixRecord> = matrices
            .par_iter()
            .enumerate()
            .map(|(i, t)| analyze_matrix(i, t, task, config))
            .collect();
        let required = convergence_required(&task.spec);
        reports.push(EnsembleReport {
            name: task.name.clone(),
            aggregates: aggregate(&records, required),
            matrices: records,
        });
    }

    let passed = reports.iter().all(|r| r.aggregates.required_ok);
    let generated_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ExperimentReport {
        lambda: config.lambda,
        tol: config.tol,
        max_iter: config.max_iter,
        generated_at,
        ensembles: reports,
        passed,
    })
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

/// Per-matrix rows of the report as a delimited table, one row per matrix,
/// with empty cells where an analysis did not run.
pub fn report_to_delimited(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "ensemble,index,converged,iterations,final_norm,final_normality_defect,\
         eigenvalue_drift,fitted_gamma,k_D_reference,stable_contraction,k_D,\
         neutral_dim,stable_dim,projection_gamma\n",
    );
    for ens in &report.ensembles {
        for m in &ens.matrices {
            let (gamma, kref) = m
                .rate
                .as_ref()
                .map(|r| (cell(r.fitted_gamma), r.k_d_reference.map_or(String::new(), cell)))
                .unwrap_or_default();
            let (contraction, kd, ndim, sdim) = m
                .dynamics
                .as_ref()
                .map(|d| {
                    (
                        cell(d.stable_contraction),
                        cell(d.k_d),
                        d.neutral_dim.to_string(),
                        d.stable_dim.to_string(),
                    )
                })
                .unwrap_or_default();
            let pgamma = m
                .projection_rate
                .as_ref()
                .map(|r| cell(r.fitted_gamma))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                ens.name,
                m.index,
                m.converged,
                m.iterations,
                cell(m.final_norm),
                cell(m.final_normality_defect),
                cell(m.eigenvalue_drift),
                gamma,
                kref,
                contraction,
                kd,
                ndim,
                sdim,
                pgamma
            ));
        }
    }
    out
}
