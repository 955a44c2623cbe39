//! Two-stage adaptive LOCC spectrum estimator.
//!
//! Stage one runs plain tomography on N_i ≈ N^μ copies: the copies are split
//! into d²−1 equal groups and group α measures the binary POVM
//! {(I ± T_α)/2}. The rough estimate σ = I/d + Σ θ̂_α T_α is diagonalized and
//! stage two measures the remaining N_f copies in σ's eigenbasis, ordered by
//! descending eigenvalue of σ. p̂_k = N_k / N_f.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{default_tol, eig_hermitian, ComplexMatrix, EigenSystem, HermitianBasis};
use crate::sampling::{projective_probs, sample_binomial, sample_multinomial, OutcomeCounts, RngStream};

/// Copy budget of one adaptive run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopySplit {
    pub total: u64,
    pub initial: u64,
    pub r#final: u64,
    pub per_generator: u64,
}

/// N_0 = max(1, ⌊N^μ/(d²−1)⌋), N_i = N_0·(d²−1), N_f = N − N_i.
pub fn split_copies(n: u64, mu: f64, d: usize) -> Result<CopySplit> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("d must be >= 2, got {d}")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidArgument(format!("mu must lie in (0, 1), got {mu}")));
    }
    let groups = (d * d - 1) as u64;
    if n < groups {
        return Err(Error::InsufficientCopies(format!("N = {n} is smaller than d²−1 = {groups}")));
    }
    let per_generator = (((n as f64).powf(mu) / groups as f64).floor() as u64).max(1);
    let initial = per_generator * groups;
    if initial >= n {
        return Err(Error::InsufficientCopies(format!(
            "N = {n} leaves no copies for the second stage (N_i = {initial})"
        )));
    }
    Ok(CopySplit { total: n, initial, r#final: n - initial, per_generator })
}

/// First-stage result.
#[derive(Clone, Debug)]
pub struct TomographyEstimate {
    pub theta_hat: Vec<f64>,
    pub sigma: ComplexMatrix<f64>,
    pub eigensystem: EigenSystem<f64>,
    /// w_{α+}: number of "+" outcomes per generator.
    pub plus_counts: Vec<u64>,
    pub per_generator: u64,
}

/// Plain tomography with `per_generator` copies for each generator.
pub fn plain_tomography(
    rho: &ComplexMatrix<f64>,
    per_generator: u64,
    basis: &HermitianBasis<f64>,
    rng: &mut RngStream,
) -> Result<TomographyEstimate> {
    if per_generator == 0 {
        return Err(Error::InsufficientCopies("plain tomography needs N_0 >= 1".into()));
    }
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: rho.dim() });
    }
    let d = basis.dim();
    let n0 = per_generator as f64;
    let mut theta_hat = Vec::with_capacity(basis.len());
    let mut plus_counts = Vec::with_capacity(basis.len());
    for t in basis.generators() {
        let theta = rho.trace_product(t).re;
        let prob_plus = ((1.0 + theta) / 2.0).clamp(0.0, 1.0);
        let w = sample_binomial(per_generator, prob_plus, rng)?;
        plus_counts.push(w);
        theta_hat.push(2.0 * w as f64 / n0 - 1.0);
    }
    let sigma = assemble_sigma(d, &theta_hat, basis);
    let eigensystem = eig_hermitian(&sigma, default_tol())?;
    Ok(TomographyEstimate { theta_hat, sigma, eigensystem, plus_counts, per_generator })
}

/// σ = I/d + Σ_α θ_α T_α.
pub fn assemble_sigma(d: usize, theta: &[f64], basis: &HermitianBasis<f64>) -> ComplexMatrix<f64> {
    &ComplexMatrix::identity(d).scale(1.0 / d as f64) + &basis.combine(theta)
}

/// Projective measurement of `n_final` copies on the frame's columns.
/// Returns the counts and p̂_k = N_k / N_f, in frame order.
pub fn second_stage(
    rho: &ComplexMatrix<f64>,
    frame: &ComplexMatrix<f64>,
    n_final: u64,
    rng: &mut RngStream,
) -> Result<(OutcomeCounts, Vec<f64>)> {
    if n_final == 0 {
        return Err(Error::InsufficientCopies("second stage needs N_f >= 1".into()));
    }
    let q = projective_probs(rho, frame)?;
    let counts = sample_multinomial(n_final, &q, rng)?;
    let p_hat = counts.frequencies();
    Ok((counts, p_hat))
}

/// Output of the full adaptive procedure.
#[derive(Clone, Debug)]
pub struct SpectrumEstimate {
    /// p̂ in the order of σ's eigenvalues, largest first.
    pub p_hat: Vec<f64>,
    pub second_stage_counts: OutcomeCounts,
    pub split: CopySplit,
    pub mu: f64,
    pub tomography: TomographyEstimate,
    /// Smallest gap between consecutive eigenvalues of σ.
    pub sigma_min_gap: f64,
    /// Set when σ's eigenvalue gaps are too small to trust the descending-order
    /// pairing of outcomes with eigenvalues of ρ.
    pub ambiguous_pairing: bool,
}

impl SpectrumEstimate {
    /// Sorted descending copy of p̂.
    pub fn p_hat_sorted(&self) -> Vec<f64> {
        let mut v = self.p_hat.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// Typical Hilbert–Schmidt radius of σ − ρ after plain tomography,
/// √((d²−1)/N_0). Pairings are flagged when σ's gaps fall below twice this.
pub fn pairing_threshold(d: usize, per_generator: u64) -> f64 {
    (((d * d - 1) as f64) / per_generator as f64).sqrt()
}

/// Both stages on a fresh budget of `n` copies.
pub fn adaptive_estimate(
    rho: &ComplexMatrix<f64>,
    n: u64,
    mu: f64,
    basis: &HermitianBasis<f64>,
    rng: &mut RngStream,
) -> Result<SpectrumEstimate> {
    let d = basis.dim();
    let split = split_copies(n, mu, d)?;
    let tomography = plain_tomography(rho, split.per_generator, basis, rng)?;
    let (second_stage_counts, p_hat) = second_stage(rho, &tomography.eigensystem.vectors, split.r#final, rng)?;
    let sigma_min_gap = tomography
        .eigensystem
        .values
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    let ambiguous_pairing = sigma_min_gap < 2.0 * pairing_threshold(d, split.per_generator);
    Ok(SpectrumEstimate { p_hat, second_stage_counts, split, mu, tomography, sigma_min_gap, ambiguous_pairing })
}
