//! Empirical convergence laboratory: seeded matrix ensembles, exponential
//! rate fits against the limit, projector-level convergence for slow
//! (non-diagonalizable) cases, continuity probes of the limit map at normal
//! points, and a batch experiment runner with deterministic reports.

pub mod continuity;
pub mod ensemble;
pub mod experiment;
pub mod rate;

pub use continuity::{continuity_probe, continuity_probe_with_params, ContinuityReport, SampleOutcome};
pub use ensemble::{
    conditioned_similarity, generate, haar_unitary, matrix_rng, random_sphere_perturbation,
    EnsembleKind, EnsembleSpec, JordanBlockSpec,
};
pub use experiment::{
    report_to_delimited, run_experiment, Aggregates, Analysis, EnsembleReport, EnsembleTask,
    ExperimentConfig, ExperimentReport, MatrixRecord,
};
pub use rate::{projection_convergence, rate_fit, RateReport};
