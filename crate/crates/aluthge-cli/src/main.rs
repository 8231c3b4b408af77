//! Command-line front end for the Aluthge-transform toolkit.
//!
//! Matrices travel as JSON documents (`{"r": n, "entries": [[{re, im}, …]]}`).
//! Every subcommand reads `--input` (or `--config` for `experiment`), writes
//! to `--out` or stdout, and renders either a `structured` JSON document or a
//! `delimited` table. Exit codes: 0 success; 1 nonconvergence where
//! convergence was asserted; 2 input or config errors; 3 numerical failure.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use aluthge::dynamics;
use aluthge::experiments::{self, ExperimentConfig};
use aluthge::linalg::{self, io};
use aluthge::spectral;
use aluthge::transform;
use aluthge::{CMatrix, Error};

#[derive(Parser)]
#[command(
    name = "aluthge",
    version,
    about = "Aluthge transform: iteration to the normal limit, spectral projectors, \
             derivative splitting, and convergence experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// JSON document.
    Structured,
    /// Comma-separated table for plotting.
    Delimited,
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    format: Format,
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply the transform once.
    Transform {
        /// Matrix document to read.
        #[arg(long)]
        input: PathBuf,
        /// Weight of the transform, in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Iterate the transform, recording per-step diagnostics.
    Iterate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Stop once step size, normality defect, and excess all fall below.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Iterate to the normal limit; nonconvergence exits 1.
    Limit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Eigenvalue clusters and spectral projectors of a matrix.
    Spectral {
        #[arg(long)]
        input: PathBuf,
        /// Override the eigenvalue merge threshold (default 1e-8·(1+max|λ|)).
        #[arg(long)]
        merge_tol: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Derivative of the transform at a normal matrix and its neutral/stable
    /// splitting, checked against the analytic commutant and orbit frames.
    Dynamics {
        #[arg(long)]
        input: PathBuf,
        /// Central-difference step (default 1e-5·(1+‖T‖₂)).
        #[arg(long)]
        fd_step: Option<f64>,
        /// Neutral-group width around eigenvalue 1 (default 0.02, shrunk
        /// automatically when the contraction factor is close to 1).
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit the exponential convergence rate of the iteration.
    Rate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Probe continuity of the limit map at a normal invertible matrix.
    Continuity {
        #[arg(long)]
        input: PathBuf,
        /// Perturbation radii, comma separated, strictly decreasing.
        #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4")]
        deltas: String,
        /// Perturbations drawn per radius.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stopping tolerance for the perturbed runs (looser than the library
        /// default: near degenerate spectra the defect plateaus at ~δ² and a
        /// tight stop would flag those samples as nonconvergent).
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a batch experiment from a config document; a missed required
    /// convergence exits 1.
    Experiment {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } => 1,
        Error::NotSquare { .. }
        | Error::NonFinite
        | Error::DimensionMismatch(_)
        | Error::InvalidParameter(_)
        | Error::InvalidDocument(_)
        | Error::InsufficientData(_)
        | Error::Io(_) => 2,
        Error::NearSingular(_)
        | Error::SpectrumEscape(_)
        | Error::BackendDisagreement { .. }
        | Error::NoSeparation(_)
        | Error::NotOrthogonal(_)
        | Error::Backend(_) => 3,
    }
}

fn emit(output: &OutputArgs, content: String) -> aluthge::Result<()> {
    match &output.out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn json_doc<T: serde::Serialize>(value: &T) -> aluthge::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_input(path: &PathBuf) -> aluthge::Result<CMatrix> {
    io::read_matrix(path)
}

fn matrix_output(output: &OutputArgs, m: &CMatrix) -> aluthge::Result<()> {
    let content = match output.format {
        Format::Structured => {
            let mut s = io::matrix_to_json(m);
            s.push('\n');
            s
        }
        Format::Delimited => io::matrix_to_delimited(m),
    };
    emit(output, content)
}

fn run(cli: Cli) -> aluthge::Result<i32> {
    match cli.cmd {
        Cmd::Transform {
            input,
            lambda,
            output,
        } => {
            let t = read_input(&input)?;
            let result = transform::aluthge(&t, lambda)?;
            matrix_output(&output, &result)?;
            Ok(0)
        }
        Cmd::Iterate {
            input,
            lambda,
            tol,
            max_iter,
            output,
        } => {
            let t = read_input(&input)?;
            let trace = transform::iterate(&t, lambda, tol, max_iter)?;
            let content = match output.format {
                Format::Structured => json_doc(&trace)?,
                Format::Delimited => trace.to_delimited(),
            };
            emit(&output, content)?;
            Ok(0)
        }
        Cmd::Limit {
            input,
            lambda,
            tol,
            max_iter,
            output,
        } => {
            let t = read_input(&input)?;
            let result = transform::limit(&t, lambda, tol, max_iter)?;
            let content = match output.format {
                Format::Structured => json_doc(&result)?,
                Format::Delimited => io::matrix_to_delimited(&result.limit),
            };
            emit(&output, content)?;
            Ok(if result.converged { 0 } else { 1 })
        }
        Cmd::Spectral {
            input,
            merge_tol,
            output,
        } => {
            let t = read_input(&input)?;
            let vals = linalg::eigenvalues(&t)?;
            let info = match merge_tol {
                Some(threshold) => spectral::cluster_spectrum_with(&vals, threshold)?,
                None => spectral::cluster_spectrum(&vals)?,
            };
            let system = spectral::spectral_projections(&t, &info)?;
            let content = match output.format {
                Format::Structured => {
                    let projectors: Vec<io::MatrixDoc> = system
                        .projectors
                        .iter()
                        .map(io::MatrixDoc::from_matrix)
                        .collect();
                    json_doc(&json!({
                        "spectrum": info,
                        "ranks": system.ranks,
                        "orthogonality_defect": system.orthogonality_defect,
                        "idempotence_defect": system.idempotence_defect(),
                        "completeness_defect": system.completeness_defect(),
                        "disjointness_defect": system.disjointness_defect(),
                        "commutation_defect": system.commutation_defect(&t),
                        "projectors": projectors,
                    }))?
                }
                Format::Delimited => {
                    let mut s = String::from("center_re,center_im,multiplicity,rank\n");
                    for i in 0..system.k() {
                        s.push_str(&format!(
                            "{:e},{:e},{},{}\n",
                            system.centers[i].re,
                            system.centers[i].im,
                            info.multiplicities[i],
                            system.ranks[i]
                        ));
                    }
                    s
                }
            };
            emit(&output, content)?;
            Ok(0)
        }
        Cmd::Dynamics {
            input,
            fd_step,
            delta,
            output,
        } => {
            let t = read_input(&input)?;
            let vals = linalg::eigenvalues(&t)?;
            let k = dynamics::k_d(&vals)?;
            let info = spectral::cluster_spectrum(&vals)?;
            let system = spectral::spectral_projections(&t, &info)?;
            let op = dynamics::numerical_derivative(&t, fd_step)?;
            let split = match delta {
                Some(d) => dynamics::split_subspaces_with(&op, k, d)?,
                None => dynamics::split_subspaces(&op, k)?,
            };
            let r = t.nrows();
            let sq_sum: usize = info.multiplicities.iter().map(|m| m * m).sum();
            let commutant = dynamics::commutant_basis(&t, &system, 1e-8)?;
            let tangent = dynamics::tangent_basis_orbit(&t, &system, 1e-8)?;
            // Containment checks: commutant directions are fixed (neutral),
            // and the stable space lies inside the orbit-tangent span.
            let commutant_angle = dynamics::principal_angles(&commutant, &split.neutral_basis)?
                .last()
                .copied()
                .unwrap_or(0.0);
            let stable_angle = if split.stable_basis.is_empty() {
                0.0
            } else {
                dynamics::principal_angles(&split.stable_basis, &tangent)?
                    .last()
                    .copied()
                    .unwrap_or(0.0)
            };
            let content = match output.format {
                Format::Structured => json_doc(&json!({
                    "k_D": k,
                    "fd_step": op.fd_step,
                    "dimension": op.dimension,
                    "neutral_dim": split.neutral_dim,
                    "stable_dim": split.stable_dim,
                    "expected_neutral_dim": r * r + sq_sum,
                    "expected_stable_dim": r * r - sq_sum,
                    "stable_contraction": split.stable_contraction,
                    "commutant_dim": commutant.len(),
                    "orbit_tangent_dim": tangent.len(),
                    "max_angle_commutant_to_neutral": commutant_angle,
                    "max_angle_stable_to_orbit_tangent": stable_angle,
                }))?,
                Format::Delimited => {
                    let mut s = String::from(
                        "k_D,neutral_dim,stable_dim,expected_neutral_dim,\
                         expected_stable_dim,stable_contraction,\
                         max_angle_commutant_to_neutral,max_angle_stable_to_orbit_tangent\n",
                    );
                    s.push_str(&format!(
                        "{:e},{},{},{},{},{:e},{:e},{:e}\n",
                        k,
                        split.neutral_dim,
                        split.stable_dim,
                        r * r + sq_sum,
                        r * r - sq_sum,
                        split.stable_contraction,
                        commutant_angle,
                        stable_angle
                    ));
                    s
                }
            };
            emit(&output, content)?;
            Ok(0)
        }
        Cmd::Rate {
            input,
            lambda,
            tol,
            max_iter,
            output,
        } => {
            let t = read_input(&input)?;
            let trace = transform::iterate(&t, lambda, tol, max_iter)?;
            let report = experiments::rate_fit(&trace, &trace.final_matrix)?;
            let content = match output.format {
                Format::Structured => json_doc(&report)?,
                Format::Delimited => {
                    let mut s = String::from("n,distance\n");
                    for (n, m) in &trace.snapshots {
                        s.push_str(&format!(
                            "{},{:e}\n",
                            n,
                            linalg::frobenius_distance(m, &trace.final_matrix)
                        ));
                    }
                    s
                }
            };
            emit(&output, content)?;
            Ok(0)
        }
        Cmd::Continuity {
            input,
            deltas,
            samples,
            seed,
            tol,
            max_iter,
            output,
        } => {
            let n0 = read_input(&input)?;
            let radii: Vec<f64> = deltas
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidParameter(format!("bad delta value: {s:?}"))
                    })
                })
                .collect::<aluthge::Result<_>>()?;
            let report = experiments::continuity_probe_with_params(
                &n0, &radii, samples, seed, tol, max_iter,
            )?;
            let content = match output.format {
                Format::Structured => json_doc(&report)?,
                Format::Delimited => {
                    let mut s = String::from("delta,m,nonconverged\n");
                    for i in 0..report.deltas.len() {
                        let m = report.m_of_delta[i];
                        let m_cell = if m.is_finite() {
                            format!("{m:e}")
                        } else {
                            String::new()
                        };
                        s.push_str(&format!(
                            "{:e},{},{}\n",
                            report.deltas[i], m_cell, report.nonconverged[i]
                        ));
                    }
                    s
                }
            };
            emit(&output, content)?;
            Ok(0)
        }
        Cmd::Experiment { config, output } => {
            let text = fs::read_to_string(&config)?;
            let parsed: ExperimentConfig = serde_json::from_str(&text)?;
            let report = experiments::run_experiment(&parsed)?;
            let content = match output.format {
                Format::Structured => json_doc(&report)?,
                Format::Delimited => experiments::report_to_delimited(&report),
            };
            emit(&output, content)?;
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(code_for(&err));
        }
    }
}
