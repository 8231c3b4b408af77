//! Seeded random matrix ensembles with controlled spectra.
//!
//! All sampling is funneled through a per-(seed, index) counter-based RNG
//! stream, so batch generation is deterministic and independent of whether
//! matrices are produced serially or in parallel.

use ndarray::Array2;
use ndarray_linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, frobenius_norm, zeros, C64, CMatrix};

/// Largest matrix dimension the desk-scale tooling accepts.
pub const MAX_DIMENSION: usize = 16;

/// The matrix classes the laboratory can sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// `S·diag(spectrum)·S⁻¹` with a random similarity of bounded condition.
    PrescribedSpectrumDiagonalizable,
    /// `S·J·S⁻¹` for a prescribed Jordan form `J` and a mild similarity.
    JordanStructured,
    /// `U·diag(spectrum)·U*` with Haar-distributed unitary `U`.
    Normal,
    /// A `Normal` draw plus a perturbation of prescribed Frobenius norm.
    PerturbedNormal,
}

/// One Jordan block: eigenvalue and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanBlockSpec {
    pub eigenvalue: C64,
    pub size: usize,
}

/// Full description of a seeded ensemble draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub r: usize,
    /// Required for every kind except `jordan_structured`; length must be `r`.
    #[serde(default)]
    pub spectrum: Option<Vec<C64>>,
    /// Required for `jordan_structured`; sizes must sum to `r`.
    #[serde(default)]
    pub jordan_blocks: Option<Vec<JordanBlockSpec>>,
    /// Condition-number cap for the random similarity. Defaults to 100 for
    /// the diagonalizable kind and 10 (mild) for the Jordan kind.
    #[serde(default)]
    pub condition_cap: Option<f64>,
    pub count: usize,
    pub seed: u64,
    /// Frobenius norm of the perturbation for `perturbed_normal`
    /// (default `1e-2`).
    #[serde(default)]
    pub perturbation: Option<f64>,
}

/// Independent RNG stream for matrix `index` of a batch seeded with `seed`.
pub fn matrix_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..32].copy_from_slice(b"aluthge-ensemble");
    ChaCha12Rng::from_seed(key)
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) / 2.0_f64.sqrt()
}

/// Haar-distributed `r×r` unitary: QR of a complex Ginibre matrix with the
/// phase convention fixed so the distribution is exactly invariant.
pub fn haar_unitary<R: Rng>(rng: &mut R, r: usize) -> Result<CMatrix> {
    let z = Array2::from_shape_fn((r, r), |_| complex_gaussian(rng));
    let (q, rr) = z.qr()?;
    let phases = ndarray::Array1::from_iter((0..r).map(|i| {
        let d = rr[[i, i]];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        }
    }));
    Ok(q.dot(&Array2::from_diag(&phases)))
}

/// A random invertible similarity with condition number at most `cap`,
/// together with its exact inverse: `S = U₁ Σ U₂*` with singular values
/// log-uniform in `[1/√cap, √cap]` (so `det Σ` concentrates near 1 and the
/// scale of `S` stays tame).
pub fn conditioned_similarity<R: Rng>(
    rng: &mut R,
    r: usize,
    cap: f64,
) -> Result<(CMatrix, CMatrix)> {
    if !(cap >= 1.0 && cap.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "condition cap must be a finite number ≥ 1, got {cap}"
        )));
    }
    let u1 = haar_unitary(rng, r)?;
    let u2 = haar_unitary(rng, r)?;
    let half_log = 0.5 * cap.ln();
    let sigmas: Vec<f64> = (0..r)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * half_log)
        .map(f64::exp)
        .collect();
    let s_diag = Array2::from_diag(&ndarray::Array1::from_iter(
        sigmas.iter().map(|&x| c(x, 0.0)),
    ));
    let s_inv_diag = Array2::from_diag(&ndarray::Array1::from_iter(
        sigmas.iter().map(|&x| c(1.0 / x, 0.0)),
    ));
    let u2d = linalg::dagger(&u2);
    let u1d = linalg::dagger(&u1);
    Ok((u1.dot(&s_diag).dot(&u2d), u2.dot(&s_inv_diag).dot(&u1d)))
}

/// Uniform direction on the Frobenius sphere of the given radius.
pub fn random_sphere_perturbation<R: Rng>(rng: &mut R, r: usize, radius: f64) -> CMatrix {
    loop {
        let g = Array2::from_shape_fn((r, r), |_| complex_gaussian(rng));
        let norm = frobenius_norm(&g);
        if norm > 0.0 {
            return g.mapv(|z| z * (radius / norm));
        }
    }
}

fn diag_of(spectrum: &[C64]) -> CMatrix {
    Array2::from_diag(&ndarray::Array1::from_iter(spectrum.iter().copied()))
}

fn jordan_matrix(blocks: &[JordanBlockSpec]) -> CMatrix {
    let r: usize = blocks.iter().map(|b| b.size).sum();
    let mut j = zeros(r);
    let mut offset = 0;
    for b in blocks {
        for i in 0..b.size {
            j[[offset + i, offset + i]] = b.eigenvalue;
            if i + 1 < b.size {
                j[[offset + i, offset + i + 1]] = c(1.0, 0.0);
            }
        }
        offset += b.size;
    }
    j
}

fn validated_spectrum(spec: &EnsembleSpec) -> Result<&[C64]> {
    let spectrum = spec.spectrum.as_deref().ok_or_else(|| {
        Error::InvalidParameter(format!("{:?} ensembles need a spectrum", spec.kind))
    })?;
    if spectrum.len() != spec.r {
        return Err(Error::InvalidParameter(format!(
            "spectrum has {} entries for dimension r = {}",
            spectrum.len(),
            spec.r
        )));
    }
    if spectrum.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter(
            "spectrum contains non-finite entries".into(),
        ));
    }
    Ok(spectrum)
}

fn validate_common(spec: &EnsembleSpec) -> Result<()> {
    if spec.r == 0 || spec.r > MAX_DIMENSION {
        return Err(Error::InvalidParameter(format!(
            "dimension must lie in 1..={MAX_DIMENSION}, got {}",
            spec.r
        )));
    }
    if spec.count == 0 {
        return Err(Error::InvalidParameter("count must be positive".into()));
    }
    if let Some(cap) = spec.condition_cap {
        if !(cap >= 1.0 && cap.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "condition cap must be a finite number ≥ 1, got {cap}"
            )));
        }
    }
    Ok(())
}

/// Draw the ensemble described by `spec`. Deterministic: each matrix comes
/// from its own `(seed, index)` stream.
pub fn generate(spec: &EnsembleSpec) -> Result<Vec<CMatrix>> {
    validate_common(spec)?;
    match spec.kind {
        EnsembleKind::PrescribedSpectrumDiagonalizable => {
            let spectrum = validated_spectrum(spec)?.to_vec();
            let cap = spec.condition_cap.unwrap_or(100.0);
            let d = diag_of(&spectrum);
            (0..spec.count)
                .map(|i| {
                    let mut rng = matrix_rng(spec.seed, i as u64);
                    let (s, s_inv) = conditioned_similarity(&mut rng, spec.r, cap)?;
                    Ok(s.dot(&d).dot(&s_inv))
                })
                .collect()
        }
        EnsembleKind::JordanStructured => {
            let blocks = spec.jordan_blocks.as_deref().ok_or_else(|| {
                Error::InvalidParameter("jordan_structured ensembles need jordan_blocks".into())
            })?;
            if blocks.is_empty() || blocks.iter().any(|b| b.size == 0) {
                return Err(Error::InvalidParameter(
                    "jordan_blocks must be non-empty with positive sizes".into(),
                ));
            }
            let total: usize = blocks.iter().map(|b| b.size).sum();
            if total != spec.r {
                return Err(Error::InvalidParameter(format!(
                    "jordan block sizes sum to {total}, expected r = {}",
                    spec.r
                )));
            }
            if blocks
                .iter()
                .any(|b| !b.eigenvalue.re.is_finite() || !b.eigenvalue.im.is_finite())
            {
                return Err(Error::InvalidParameter(
                    "jordan_blocks contain non-finite eigenvalues".into(),
                ));
            }
            let cap = spec.condition_cap.unwrap_or(10.0);
            let j = jordan_matrix(blocks);
            (0..spec.count)
                .map(|i| {
                    let mut rng = matrix_rng(spec.seed, i as u64);
                    let (s, s_inv) = conditioned_similarity(&mut rng, spec.r, cap)?;
                    Ok(s.dot(&j).dot(&s_inv))
                })
                .collect()
        }
        EnsembleKind::Normal => {
            let spectrum = validated_spectrum(spec)?.to_vec();
            let d = diag_of(&spectrum);
            (0..spec.count)
                .map(|i| {
                    let mut rng = matrix_rng(spec.seed, i as u64);
                    let u = haar_unitary(&mut rng, spec.r)?;
                    Ok(u.dot(&d).dot(&linalg::dagger(&u)))
                })
                .collect()
        }
        EnsembleKind::PerturbedNormal => {
            let spectrum = validated_spectrum(spec)?.to_vec();
            let eps = spec.perturbation.unwrap_or(1e-2);
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "perturbation must be positive and finite, got {eps}"
                )));
            }
            let d = diag_of(&spectrum);
            (0..spec.count)
                .map(|i| {
                    let mut rng = matrix_rng(spec.seed, i as u64);
                    let u = haar_unitary(&mut rng, spec.r)?;
                    let n = u.dot(&d).dot(&linalg::dagger(&u));
                    let p = random_sphere_perturbation(&mut rng, spec.r, eps);
                    Ok(n + p)
                })
                .collect()
        }
    }
}
