//! Numerical verification of the eigenvalue/eigenspace perturbation bounds
//! and the tail bounds for the second-stage probabilities.
//!
//! Perturbation bounds checked for ρ = Σ_a p_a Π_a (n distinct eigenvalues,
//! gap Δ) and σ = Σ_k s_k |ψ_k⟩⟨ψ_k| with d_HS(ρ, σ) ≤ δ < Δ/(1+√d):
//!
//! 1. |p_a − s_k| √⟨ψ_k|Π_a|ψ_k⟩ ≤ δ for all a, k;
//! 2. the sets M_a = {k : |p_a − s_k| ≤ δ} are nonempty, cover every k and
//!    are pairwise disjoint;
//! 3. √⟨ψ_k|Π_a|ψ_k⟩ ≤ δ/(Δ − δ) whenever k ∈ M_b, b ≠ a;
//! 4. |M_a| equals the degeneracy d_a = tr Π_a;
//! 5. |p_a − ⟨ψ_k|ρ|ψ_k⟩| ≤ c(ρ) δ² for k ∈ M_a, with c(ρ) = 4(d−1)/Δ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{plain_tomography, split_copies};
use crate::linalg::{default_tol, eig_hermitian, gell_mann_basis, hs_distance, unitary_from_generators, ComplexMatrix, HermitianBasis};
use crate::model::{rho_from_spectrum, SpectrumParams};
use crate::sampling::{projective_probs, RngStream};

/// Tolerance for merging numerically equal eigenvalues of ρ.
pub const MERGE_TOL: f64 = 1e-9;
/// Slack allowed on every checked inequality.
pub const LEMMA_SLACK: f64 = 1e-9;

/// Distinct eigenvalues of ρ with their eigenprojectors, largest first.
#[derive(Clone, Debug)]
pub struct SpectralStructure {
    pub dim: usize,
    pub values: Vec<f64>,
    pub projectors: Vec<ComplexMatrix<f64>>,
    pub degeneracies: Vec<usize>,
    /// Δ = min_{a≠b} |p_a − p_b|.
    pub gap: f64,
}

impl SpectralStructure {
    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    /// c(ρ) = 4(d−1)/Δ.
    pub fn constant(&self) -> f64 {
        lemma_constant(self.dim, self.gap)
    }

    /// Admissible radius Δ/(1+√d); δ must be strictly below it.
    pub fn admissible_radius(&self) -> f64 {
        self.gap / (1.0 + (self.dim as f64).sqrt())
    }
}

pub fn lemma_constant(d: usize, gap: f64) -> f64 {
    4.0 * (d as f64 - 1.0) / gap
}

/// Groups the eigenvalues of ρ into clusters no wider than `merge_tol`
/// between neighbours and builds the eigenprojector of each cluster.
pub fn spectral_structure(rho: &ComplexMatrix<f64>, merge_tol: f64) -> Result<SpectralStructure> {
    let d = rho.dim();
    let eig = eig_hermitian(rho, default_tol())?;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..d {
        match clusters.last_mut() {
            Some(c) if eig.values[*c.last().unwrap()] - eig.values[k] <= merge_tol => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    if clusters.len() < 2 {
        return Err(Error::DegenerateModel);
    }
    let values: Vec<f64> =
        clusters.iter().map(|c| c.iter().map(|&k| eig.values[k]).sum::<f64>() / c.len() as f64).collect();
    let projectors = clusters
        .iter()
        .map(|c| {
            let mut proj = ComplexMatrix::zeros(d);
            for &k in c {
                proj = &proj + &ComplexMatrix::outer(&eig.vector(k));
            }
            proj
        })
        .collect();
    let gap = values.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    Ok(SpectralStructure { dim: d, values, projectors, degeneracies: clusters.iter().map(Vec::len).collect(), gap })
}

/// M_a = {k : |p_a − s_k| ≤ δ} for every distinct eigenvalue p_a.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingSets {
    pub sets: Vec<Vec<usize>>,
}

impl MatchingSets {
    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    pub fn pairwise_disjoint(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.sets.iter().flatten().all(|k| seen.insert(*k))
    }

    /// Every index in 0..d belongs to some set.
    pub fn covers(&self, d: usize) -> bool {
        (0..d).all(|k| self.sets.iter().any(|s| s.contains(&k)))
    }
}

pub fn matching_sets(values: &[f64], sigma_values: &[f64], delta: f64, slack: f64) -> MatchingSets {
    MatchingSets {
        sets: values
            .iter()
            .map(|&pa| (0..sigma_values.len()).filter(|&k| (pa - sigma_values[k]).abs() <= delta + slack).collect())
            .collect(),
    }
}

/// How a perturbed instance was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    Rotation,
    Shift,
    Combined,
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    pub sigma: ComplexMatrix<f64>,
    pub mode: PerturbationMode,
}

/// Random σ = U(ρ + D)U† with a trace-zero diagonal shift D (in ρ's
/// eigenbasis) and U = exp(iη·T) for a random small η. Rotation-only,
/// shift-only and combined perturbations are equally likely. If the result is
/// farther than δ from ρ it is pulled back along the segment to ρ so that
/// d_HS(ρ, σ) = δ.
pub fn perturbed_sigma(
    rho: &ComplexMatrix<f64>,
    delta: f64,
    rng: &mut RngStream,
    basis: &HermitianBasis<f64>,
) -> Result<Perturbation> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    let d = rho.dim();
    if basis.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: basis.dim() });
    }
    let mode = match (rng.uniform() * 3.0) as u32 {
        0 => PerturbationMode::Rotation,
        1 => PerturbationMode::Shift,
        _ => PerturbationMode::Combined,
    };
    if delta == 0.0 {
        return Ok(Perturbation { sigma: rho.clone(), mode });
    }
    // raw magnitude up to ~2δ so both the pulled-back and the interior case occur
    let magnitude = 2.0 * delta * rng.uniform();

    let eig = eig_hermitian(rho, default_tol())?;
    let mut shifted = rho.clone();
    if mode != PerturbationMode::Rotation {
        let mut shift: Vec<f64> = (0..d).map(|_| rng.uniform() - 0.5).collect();
        let avg = shift.iter().sum::<f64>() / d as f64;
        shift.iter_mut().for_each(|x| *x -= avg);
        let norm = shift.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let diag = ComplexMatrix::from_real_diagonal(&shift.iter().map(|x| x * magnitude / norm).collect::<Vec<_>>());
            shifted = &shifted + &diag.conjugate_by(&eig.vectors);
        }
    }
    let mut sigma = shifted;
    if mode != PerturbationMode::Shift {
        let mut eta: Vec<f64> = (0..basis.len()).map(|_| rng.uniform() - 0.5).collect();
        let norm = eta.iter().map(|x| x * x).sum::<f64>().sqrt();
        let angle = magnitude / rho.frobenius_norm().max(f64::MIN_POSITIVE);
        eta.iter_mut().for_each(|x| *x *= angle / norm);
        let u = unitary_from_generators(&eta, basis)?;
        sigma = sigma.conjugate_by(&u);
    }
    sigma = sigma.hermitian_part();

    let dist = hs_distance(rho, &sigma)?;
    if dist > delta {
        // σ ← ρ + (δ/dist)(σ − ρ), shrunk slightly so round-off cannot push it past δ
        let t = delta / dist * (1.0 - 1e-14);
        sigma = &rho.scale(1.0 - t) + &sigma.scale(t);
    }
    Ok(Perturbation { sigma, mode })
}

/// Result of checking the five perturbation bounds on one or many instances.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub samples_tested: u64,
    /// Violations of points 1..5, index 0 = point 1.
    pub violations: [u64; 5],
    /// Smallest (bound − value) seen per point; negative means violated.
    pub worst_margins: [f64; 5],
}

impl ViolationReport {
    fn empty() -> Self {
        Self { samples_tested: 0, violations: [0; 5], worst_margins: [f64::INFINITY; 5] }
    }

    pub fn total_violations(&self) -> u64 {
        self.violations.iter().sum()
    }

    fn record(&mut self, point: usize, margin: f64) {
        self.worst_margins[point] = self.worst_margins[point].min(margin);
        if margin < -LEMMA_SLACK {
            self.violations[point] += 1;
        }
    }

    /// Combines two reports (associative and commutative).
    pub fn merge(mut self, other: &ViolationReport) -> Self {
        self.samples_tested += other.samples_tested;
        for i in 0..5 {
            self.violations[i] += other.violations[i];
            self.worst_margins[i] = self.worst_margins[i].min(other.worst_margins[i]);
        }
        self
    }
}

/// Checks all five bounds on one (ρ, σ, δ) instance.
///
/// Returns [`Error::HypothesisViolation`] when d_HS(ρ, σ) > δ or
/// δ ≥ Δ/(1+√d); that is a bad instance, not a failed bound.
pub fn check_lemma1(rho: &ComplexMatrix<f64>, sigma: &ComplexMatrix<f64>, delta: f64) -> Result<ViolationReport> {
    let structure = spectral_structure(rho, MERGE_TOL)?;
    let d = rho.dim();
    let dist = hs_distance(rho, sigma)?;
    if dist > delta + 1e-12 {
        return Err(Error::HypothesisViolation(format!("d_HS(rho, sigma) = {dist} exceeds delta = {delta}")));
    }
    let radius = structure.admissible_radius();
    if !(delta < radius) {
        return Err(Error::HypothesisViolation(format!("delta = {delta} is not below Δ/(1+√d) = {radius}")));
    }
    let sig = eig_hermitian(sigma, default_tol())?;
    let gap = structure.gap;
    let n = structure.distinct();

    // overlap[a][k] = ⟨ψ_k|Π_a|ψ_k⟩
    let overlap: Vec<Vec<f64>> = structure
        .projectors
        .iter()
        .map(|proj| (0..d).map(|k| proj.expectation(&sig.vector(k)).re.max(0.0)).collect())
        .collect();

    let mut report = ViolationReport::empty();
    report.samples_tested = 1;

    // point 1
    let mut m1 = f64::INFINITY;
    for a in 0..n {
        for k in 0..d {
            m1 = m1.min(delta - (structure.values[a] - sig.values[k]).abs() * overlap[a][k].sqrt());
        }
    }
    report.record(0, m1);

    // point 2
    let sets = matching_sets(&structure.values, &sig.values, delta, LEMMA_SLACK);
    let nearest_sigma = structure
        .values
        .iter()
        .map(|&pa| sig.values.iter().map(|&s| (pa - s).abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let nearest_rho = sig
        .values
        .iter()
        .map(|&s| structure.values.iter().map(|&pa| (pa - s).abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut m2 = delta - nearest_sigma.max(nearest_rho);
    if !sets.pairwise_disjoint() {
        m2 = m2.min(-1.0);
    }
    report.record(1, m2);

    // point 3
    let cross_bound = delta / (gap - delta);
    let mut m3 = f64::INFINITY;
    for (b, set) in sets.sets.iter().enumerate() {
        for &k in set {
            for a in (0..n).filter(|&a| a != b) {
                m3 = m3.min(cross_bound - overlap[a][k].sqrt());
            }
        }
    }
    report.record(2, m3);

    // point 4
    let m4 = sets
        .sizes()
        .iter()
        .zip(&structure.degeneracies)
        .map(|(&m, &da)| -((m as f64) - (da as f64)).abs())
        .fold(0.0, f64::min);
    report.record(3, m4);

    // point 5
    let c = structure.constant();
    let mut m5 = f64::INFINITY;
    for (a, set) in sets.sets.iter().enumerate() {
        for &k in set {
            let expect = rho.expectation(&sig.vector(k)).re;
            m5 = m5.min(c * delta * delta - (structure.values[a] - expect).abs());
        }
    }
    report.record(4, m5);

    Ok(report)
}

/// Random ρ for the randomized suite: a spectrum with a random number of
/// distinct levels and random multiplicities in a random eigenbasis.
pub fn random_instance_state(d: usize, rng: &mut RngStream, basis: &HermitianBasis<f64>) -> Result<ComplexMatrix<f64>> {
    let distinct = 2 + ((rng.uniform() * (d - 1) as f64) as usize).min(d - 2);
    // random multiplicities summing to d, each >= 1
    let mut mult = vec![1usize; distinct];
    for _ in distinct..d {
        let i = ((rng.uniform() * distinct as f64) as usize).min(distinct - 1);
        mult[i] += 1;
    }
    let levels: Vec<f64> = (0..distinct).map(|_| 0.05 + rng.uniform()).collect();
    let mut spectrum: Vec<f64> = levels.iter().zip(&mult).flat_map(|(&v, &m)| std::iter::repeat_n(v, m)).collect();
    let total: f64 = spectrum.iter().sum();
    spectrum.iter_mut().for_each(|x| *x /= total);
    let eta: Vec<f64> = (0..basis.len()).map(|_| (rng.uniform() - 0.5) * 2.0 * std::f64::consts::PI).collect();
    let frame = unitary_from_generators(&eta, basis)?;
    rho_from_spectrum(&SpectrumParams::from_full(&spectrum)?, &frame)
}

/// Fixed degenerate spectra always included in the randomized suite.
pub const DEGENERATE_SPECTRA: &[&[f64]] = &[&[0.4, 0.4, 0.2], &[0.3, 0.3, 0.2, 0.2], &[0.4, 0.2, 0.2, 0.2]];

/// Randomized check over `samples` admissible instances, spread evenly over
/// `dims`. Every tenth instance uses one of [`DEGENERATE_SPECTRA`] of
/// matching dimension when available. δ is drawn uniformly below the
/// admissible radius.
pub fn lemma1_suite(samples: u64, dims: &[usize], master_seed: u64) -> Result<ViolationReport> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidDimension(format!("dimensions must be >= 2, got {dims:?}")));
    }
    let bases = dims.iter().map(|&d| gell_mann_basis::<f64>(d)).collect::<Result<Vec<_>>>()?;
    let reports = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i);
            let which = (i % dims.len() as u64) as usize;
            let (d, basis) = (dims[which], &bases[which]);
            let fixed: Vec<&[f64]> = DEGENERATE_SPECTRA.iter().copied().filter(|s| s.len() == d).collect();
            let rho = if i % 10 == 0 && !fixed.is_empty() {
                let spec = fixed[(i / 10) as usize % fixed.len()];
                let eta: Vec<f64> = (0..basis.len()).map(|_| rng.uniform() - 0.5).collect();
                rho_from_spectrum(&SpectrumParams::from_full(spec)?, &unitary_from_generators(&eta, basis)?)?
            } else {
                random_instance_state(d, &mut rng, basis)?
            };
            let radius = spectral_structure(&rho, MERGE_TOL)?.admissible_radius();
            // strictly inside the admissible ball
            let delta = radius * (1.0 - rng.uniform()) * (1.0 - 1e-9);
            let pert = perturbed_sigma(&rho, delta, &mut rng, basis)?;
            check_lemma1(&rho, &pert.sigma, delta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reports.iter().fold(ViolationReport::empty(), |acc, r| acc.merge(r)))
}

/// Two-sided bound Pr[|X − np| ≥ λ] ≤ 2 exp(−2λ²/n) for X ~ Bin(n, p).
pub fn chernoff_bound(n: u64, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("Chernoff bound needs n >= 1".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(2.0 * (-2.0 * lambda * lambda / n as f64).exp())
}

/// Exact Pr[|X − np| ≥ λ] for X ~ Bin(n, p), summed from the pmf.
/// Outcomes within 1e−9 of the boundary count as inside the tail.
pub fn binomial_two_sided_tail(n: u64, p: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(format!("binomial probability {p} outside [0, 1]")));
    }
    let mean = n as f64 * p;
    let pmf = binomial_pmf(n, p);
    let tail: Vec<f64> =
        pmf.iter().enumerate().filter(|(x, _)| (*x as f64 - mean).abs() >= lambda - 1e-9).map(|(_, &w)| w).collect();
    // rounding in the pmf can push the sum a few ulps past 1
    Ok(crate::stats::pairwise_sum(&tail).min(1.0))
}

/// Full Bin(n, p) pmf via log-space recurrence.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    if p == 0.0 || p == 1.0 {
        let mut v = vec![0.0; len];
        v[if p == 0.0 { 0 } else { n as usize }] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_c = 0.0; // ln C(n, x)
    let mut out = Vec::with_capacity(len);
    for x in 0..len {
        if x > 0 {
            log_c += ((n as usize - x + 1) as f64).ln() - (x as f64).ln();
        }
        out.push((log_c + x as f64 * lp + (n as usize - x) as f64 * lq).exp());
    }
    out
}

/// One grid point of the Chernoff-versus-exact comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRow {
    pub n: u64,
    pub p: f64,
    pub lambda: u64,
    pub exact_tail: f64,
    pub bound: f64,
}

impl ChernoffRow {
    pub fn holds(&self) -> bool {
        self.exact_tail <= self.bound
    }
}

/// Compares the bound with the exact tail for every integer λ in 0..=n/2.
pub fn chernoff_grid(ns: &[u64], ps: &[f64]) -> Result<Vec<ChernoffRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        for &p in ps {
            for lambda in 0..=n / 2 {
                rows.push(ChernoffRow {
                    n,
                    p,
                    lambda,
                    exact_tail: binomial_two_sided_tail(n, p, lambda as f64)?,
                    bound: chernoff_bound(n, lambda as f64)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Upper bound on Pr[√N |q_k − p_k| ≥ ε] after plain tomography on N^μ copies:
/// 2(d²−1) exp[−ε N^{μ−1/2} / (2 c(ρ) (d²−1)²)], c(ρ) = 4(d−1)/Δ.
pub fn tail_probability_bound(epsilon: f64, n: f64, mu: f64, structure: &SpectralStructure) -> Result<f64> {
    tail_probability_bound_for_gap(epsilon, n, mu, structure.gap, structure.dim)
}

pub fn tail_probability_bound_for_gap(epsilon: f64, n: f64, mu: f64, gap: f64, d: usize) -> Result<f64> {
    Ok(log_tail_probability_bound(epsilon, n, mu, gap, d)?.exp())
}

/// Natural log of [`tail_probability_bound_for_gap`]; stays finite where the
/// bound itself underflows.
pub fn log_tail_probability_bound(epsilon: f64, n: f64, mu: f64, gap: f64, d: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(gap > 0.0) {
        return Err(Error::InvalidArgument(format!("spectral gap must be > 0, got {gap}")));
    }
    if d < 2 || !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("need d >= 2 and N >= 1, got d = {d}, N = {n}")));
    }
    let g = (d * d - 1) as f64;
    let c = lemma_constant(d, gap);
    Ok((2.0 * g).ln() - epsilon * n.powf(mu - 0.5) / (2.0 * c * g * g))
}

/// Monte Carlo estimate of Pr[max_k √N |q_k − p_k| ≥ ε].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub frequency: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Runs `trials` first stages and counts how often some second-stage
/// probability q_k (in σ's descending eigenbasis) is √N·ε-far from the
/// descending-sorted true p_k.
pub fn empirical_tail(
    spec: &SpectrumParams<f64>,
    frame: &ComplexMatrix<f64>,
    n: u64,
    mu: f64,
    epsilon: f64,
    trials: u64,
    master_seed: u64,
) -> Result<TailEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let d = spec.dim();
    let rho = rho_from_spectrum(spec, frame)?;
    let p_sorted = spec.sorted_descending();
    let basis = gell_mann_basis::<f64>(d)?;
    let split = split_copies(n, mu, d)?;
    let root_n = (n as f64).sqrt();
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i);
            let tomo = plain_tomography(&rho, split.per_generator, &basis, &mut rng)?;
            let q = projective_probs(&rho, &tomo.eigensystem.vectors)?;
            let worst = q.iter().zip(&p_sorted).map(|(qk, pk)| (qk - pk).abs()).fold(0.0, f64::max);
            Ok(root_n * worst >= epsilon)
        })
        .collect::<Result<Vec<_>>>()?;
    let count = hits.iter().filter(|&&h| h).count() as f64;
    let r = trials as f64;
    let frequency = count / r;
    Ok(TailEstimate { frequency, stderr: (frequency * (1.0 - frequency) / r).sqrt(), trials })
}
