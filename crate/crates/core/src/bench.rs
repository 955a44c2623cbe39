//! Monte Carlo mean-square-error benchmarks against the quantum Cramér–Rao
//! bound H(p)⁻¹.
//!
//! Errors are always taken against the true spectrum sorted descending, and
//! estimates are reported in the order of the estimated eigenbasis (largest
//! eigenvalue of σ first). Trial `i` draws from `RngStream::new(seed, i)`;
//! trials run in parallel and are reduced in index order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{adaptive_estimate, plain_tomography, second_stage, split_copies};
use crate::linalg::{gell_mann_basis, ComplexMatrix, RealMatrix};
use crate::model::{qfi_inverse, rho_from_spectrum, SpectrumParams};
use crate::sampling::{projective_probs, RngStream};
use crate::stats::{mean, mean_and_se, standard_error};

/// Default number of trials for MSE runs.
pub const DEFAULT_MSE_TRIALS: u64 = 2000;
/// Default number of trials for threshold sweeps.
pub const DEFAULT_SWEEP_TRIALS: u64 = 10_000;

/// Column header of the MSE CSV output.
pub const MSE_CSV_HEADER: &str = "d,N,mu,R,seed,k,l,mse,scaled_mse,target,gap,stderr";
/// Column header of the threshold-sweep CSV output.
pub const SWEEP_CSV_HEADER: &str = "d,N,mu,R,seed,N0,k,l,scaled_bias_sq,stderr";

/// Conditional second-stage MSE given the outcome probabilities q:
/// (q_k δ_kl − q_k q_l)/N_f + (p_k − q_k)(p_l − q_l), k, l < d−1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMse {
    pub q: Vec<f64>,
    pub n_final: u64,
    pub matrix: RealMatrix<f64>,
}

impl ConditionalMse {
    /// Multinomial variance part alone.
    pub fn variance_term(&self) -> RealMatrix<f64> {
        let q = &self.q;
        let n = self.matrix.rows();
        let nf = self.n_final as f64;
        RealMatrix::from_fn(n, n, |k, l| (if k == l { q[k] } else { 0.0 } - q[k] * q[l]) / nf)
    }
}

/// `p` must be aligned with `q` (same outcome order).
pub fn conditional_mse_closed_form(q: &[f64], p: &SpectrumParams<f64>, n_final: u64) -> Result<ConditionalMse> {
    let full = p.full();
    if q.len() != full.len() {
        return Err(Error::DimensionMismatch { expected: full.len(), got: q.len() });
    }
    if n_final == 0 {
        return Err(Error::InsufficientCopies("conditional MSE needs N_f >= 1".into()));
    }
    if q.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidProbability(format!("q = {q:?} is not a probability vector")));
    }
    let n = full.len() - 1;
    let nf = n_final as f64;
    let matrix = RealMatrix::from_fn(n, n, |k, l| {
        let var = (if k == l { q[k] } else { 0.0 } - q[k] * q[l]) / nf;
        var + (full[k] - q[k]) * (full[l] - q[l])
    });
    Ok(ConditionalMse { q: q.to_vec(), n_final, matrix })
}

/// Which measurement strategy a benchmark runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Strategy {
    /// Plain tomography on ~N^μ copies, then measurement in σ's eigenbasis.
    Adaptive { mu: f64 },
    /// All N copies measured in the true eigenbasis.
    KnownBasis,
}

impl Strategy {
    pub fn mu(&self) -> Option<f64> {
        match self {
            Strategy::Adaptive { mu } => Some(*mu),
            Strategy::KnownBasis => None,
        }
    }
}

/// Monte Carlo estimate of the (d−1)×(d−1) MSE matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub d: usize,
    pub n: u64,
    pub strategy: Strategy,
    pub trials: u64,
    pub master_seed: u64,
    /// True spectrum sorted descending; errors are taken against this.
    pub true_spectrum: Vec<f64>,
    pub n_final: u64,
    pub mse: RealMatrix<f64>,
    pub bias: Vec<f64>,
    pub scaled_mse: RealMatrix<f64>,
    pub qcrb_target: RealMatrix<f64>,
    pub gap: RealMatrix<f64>,
    /// Monte Carlo standard errors of the `mse` entries.
    pub standard_errors: RealMatrix<f64>,
    /// Conditional MSE given each sampled first stage, averaged over trials.
    pub conditional_mse_mean: RealMatrix<f64>,
    pub conditional_standard_errors: RealMatrix<f64>,
    /// N·E[(q_k − p_k)(q_l − p_l)], the scaled squared-bias part.
    pub scaled_bias_square: RealMatrix<f64>,
    /// Trials whose σ eigenvalue gaps were too small for a trustworthy pairing.
    pub ambiguous_pairings: u64,
}

impl MseReport {
    /// CSV rows (no header), one per (k, l) entry, 1-based indices.
    pub fn csv_rows(&self) -> Vec<String> {
        let mu = self.strategy.mu().map(|m| m.to_string()).unwrap_or_default();
        let n = self.mse.rows();
        let mut rows = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    self.d,
                    self.n,
                    mu,
                    self.trials,
                    self.master_seed,
                    k + 1,
                    l + 1,
                    self.mse[(k, l)],
                    self.scaled_mse[(k, l)],
                    self.qcrb_target[(k, l)],
                    self.gap[(k, l)],
                    self.standard_errors[(k, l)],
                ));
            }
        }
        rows
    }
}

struct Trial {
    err: Vec<f64>,
    q: Vec<f64>,
    n_final: u64,
    ambiguous: bool,
}

/// Sorts (eigenvalue, eigenvector) pairs descending by eigenvalue.
fn sorted_model(spec: &SpectrumParams<f64>, frame: &ComplexMatrix<f64>) -> Result<(Vec<f64>, ComplexMatrix<f64>)> {
    let d = spec.dim();
    if frame.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: frame.dim() });
    }
    let full = spec.full();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| full[b].total_cmp(&full[a]));
    let p = order.iter().map(|&i| full[i]).collect();
    let f = ComplexMatrix::from_fn(d, |i, k| frame[(i, order[k])]);
    Ok((p, f))
}

/// Runs `trials` independent estimations of the spectrum of
/// `rho_from_spectrum(spec, frame)` and aggregates the error statistics.
pub fn mse_monte_carlo(
    spec: &SpectrumParams<f64>,
    frame: &ComplexMatrix<f64>,
    n: u64,
    strategy: Strategy,
    trials: u64,
    master_seed: u64,
) -> Result<MseReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let d = spec.dim();
    let rho = rho_from_spectrum(spec, frame)?;
    let (p_sorted, frame_sorted) = sorted_model(spec, frame)?;
    let basis = gell_mann_basis::<f64>(d)?;
    if let Strategy::Adaptive { mu } = strategy {
        split_copies(n, mu, d)?;
    } else if n == 0 {
        return Err(Error::InsufficientCopies("known-basis run needs N >= 1".into()));
    }

    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(master_seed, i);
            let (p_hat, q, n_final, ambiguous) = match strategy {
                Strategy::Adaptive { mu } => {
                    let est = adaptive_estimate(&rho, n, mu, &basis, &mut rng)?;
                    let q = projective_probs(&rho, &est.tomography.eigensystem.vectors)?;
                    (est.p_hat, q, est.split.r#final, est.ambiguous_pairing)
                }
                Strategy::KnownBasis => {
                    let (_, p_hat) = second_stage(&rho, &frame_sorted, n, &mut rng)?;
                    (p_hat, p_sorted.clone(), n, false)
                }
            };
            let err = (0..d - 1).map(|k| p_hat[k] - p_sorted[k]).collect();
            Ok(Trial { err, q, n_final, ambiguous })
        })
        .collect::<Result<Vec<_>>>()?;

    let true_spec = SpectrumParams::from_full(&p_sorted)?;
    let n_final = outcomes[0].n_final;
    let m = d - 1;
    let nf = n as f64;

    let entry_stats = |f: &dyn Fn(&Trial) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = outcomes.iter().map(f).collect();
        mean_and_se(&xs)
    };

    let mut mse = RealMatrix::zeros(m, m);
    let mut se = RealMatrix::zeros(m, m);
    let mut cond = RealMatrix::zeros(m, m);
    let mut cond_se = RealMatrix::zeros(m, m);
    let mut bias_sq = RealMatrix::zeros(m, m);
    for k in 0..m {
        for l in k..m {
            let (v, s) = entry_stats(&|t: &Trial| t.err[k] * t.err[l]);
            let (c, cs) = entry_stats(&|t: &Trial| {
                let var = (if k == l { t.q[k] } else { 0.0 } - t.q[k] * t.q[l]) / t.n_final as f64;
                var + (p_sorted[k] - t.q[k]) * (p_sorted[l] - t.q[l])
            });
            let (b, _) = entry_stats(&|t: &Trial| nf * (t.q[k] - p_sorted[k]) * (t.q[l] - p_sorted[l]));
            for (i, j) in [(k, l), (l, k)] {
                mse[(i, j)] = v;
                se[(i, j)] = s;
                cond[(i, j)] = c;
                cond_se[(i, j)] = cs;
                bias_sq[(i, j)] = b;
            }
        }
    }
    let bias = (0..m).map(|k| mean(&outcomes.iter().map(|t| t.err[k]).collect::<Vec<_>>())).collect();
    let scaled_mse = mse.map(|x| x * nf);
    let qcrb_target = qfi_inverse(&true_spec);
    let gap = scaled_mse.zip_with(&qcrb_target, |a, b| a - b);
    let ambiguous_pairings = outcomes.iter().filter(|t| t.ambiguous).count() as u64;

    Ok(MseReport {
        d,
        n,
        strategy,
        trials,
        master_seed,
        true_spectrum: p_sorted,
        n_final,
        mse,
        bias,
        scaled_mse,
        qcrb_target,
        gap,
        standard_errors: se,
        conditional_mse_mean: cond,
        conditional_standard_errors: cond_se,
        scaled_bias_square: bias_sq,
        ambiguous_pairings,
    })
}

/// One cell of a μ-threshold sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub mu: f64,
    pub per_generator: u64,
    /// 1-based indices into the free parameters.
    pub k: usize,
    pub l: usize,
    /// Monte Carlo estimate of E[N(q_k − p_k)(q_l − p_l)].
    pub scaled_bias_sq: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub d: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    self.d, r.n, r.mu, self.trials, self.master_seed, r.per_generator, r.k, r.l, r.scaled_bias_sq, r.stderr
                )
            })
            .collect()
    }

    /// Values of entry (k, l) for fixed μ, in N-grid order.
    pub fn series(&self, mu: f64, k: usize, l: usize) -> Vec<f64> {
        self.rows.iter().filter(|r| r.mu == mu && r.k == k && r.l == l).map(|r| r.scaled_bias_sq).collect()
    }
}

/// Estimates the scaled squared bias E[N(q_k − p_k)(q_l − p_l)] of the
/// second-stage probabilities for every (N, μ) pair. Only the first stage is
/// simulated; q is computed exactly from σ's eigenbasis.
pub fn mu_threshold_sweep(
    spec: &SpectrumParams<f64>,
    frame: &ComplexMatrix<f64>,
    n_grid: &[u64],
    mu_list: &[f64],
    trials: u64,
    master_seed: u64,
) -> Result<SweepTable> {
    if n_grid.is_empty() || mu_list.is_empty() {
        return Err(Error::InvalidArgument("N grid and mu list must be nonempty".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let d = spec.dim();
    let rho = rho_from_spectrum(spec, frame)?;
    let (p_sorted, _) = sorted_model(spec, frame)?;
    let basis = gell_mann_basis::<f64>(d)?;
    let m = d - 1;
    let mut rows = Vec::new();
    for &mu in mu_list {
        for &n in n_grid {
            let split = split_copies(n, mu, d)?;
            let deviations: Vec<Vec<f64>> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = RngStream::new(master_seed, i);
                    let tomo = plain_tomography(&rho, split.per_generator, &basis, &mut rng)?;
                    let q = projective_probs(&rho, &tomo.eigensystem.vectors)?;
                    Ok((0..m).map(|k| q[k] - p_sorted[k]).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            let nf = n as f64;
            for k in 0..m {
                for l in k..m {
                    let xs: Vec<f64> = deviations.iter().map(|dev| nf * dev[k] * dev[l]).collect();
                    rows.push(SweepRow {
                        n,
                        mu,
                        per_generator: split.per_generator,
                        k: k + 1,
                        l: l + 1,
                        scaled_bias_sq: mean(&xs),
                        stderr: standard_error(&xs),
                    });
                }
            }
        }
    }
    Ok(SweepTable { d, trials, master_seed, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: &[f64]) -> SpectrumParams<f64> {
        SpectrumParams::new(p.to_vec()).unwrap()
    }

    #[test]
    fn conditional_closed_form_examples() {
        let c = conditional_mse_closed_form(&[0.6, 0.4], &params(&[0.7]), 100).unwrap();
        assert!((c.matrix[(0, 0)] - 0.0124).abs() < 1e-15);

        let p = params(&[0.5, 0.3]);
        let c = conditional_mse_closed_form(&p.full(), &p, 50).unwrap();
        let want = qfi_inverse(&p).map(|x| x / 50.0);
        assert!(c.matrix.max_abs_diff(&want) < 1e-15);
        assert!(c.matrix.max_abs_diff(&c.variance_term()) < 1e-15);
    }

    #[test]
    fn conditional_closed_form_large_sample_limit_is_bias_square() {
        let q = [0.45, 0.35, 0.2];
        let p = params(&[0.5, 0.3]);
        let c = conditional_mse_closed_form(&q, &p, u64::MAX).unwrap();
        let bias = RealMatrix::from_fn(2, 2, |k, l| (p.full()[k] - q[k]) * (p.full()[l] - q[l]));
        assert!(c.matrix.max_abs_diff(&bias) < 1e-15);
        assert!(c.matrix.is_symmetric(0.0));
    }

    #[test]
    fn conditional_closed_form_rejects_bad_input() {
        let p = params(&[0.7]);
        assert!(conditional_mse_closed_form(&[0.6, 0.4], &p, 0).is_err());
        assert!(conditional_mse_closed_form(&[0.6, 0.3, 0.1], &p, 10).is_err());
        assert!(conditional_mse_closed_form(&[1.6, -0.6], &p, 10).is_err());
    }

    #[test]
    fn known_basis_matches_qcrb() {
        let p = params(&[0.7]);
        let r = mse_monte_carlo(&p, &ComplexMatrix::identity(2), 1000, Strategy::KnownBasis, 2000, 7).unwrap();
        let diff = (r.scaled_mse[(0, 0)] - 0.21).abs();
        assert!(diff < 3.0 * 1000.0 * r.standard_errors[(0, 0)], "scaled {} se {}", r.scaled_mse[(0, 0)], r.standard_errors[(0, 0)]);
        assert_eq!(r.n_final, 1000);
        assert!(r.scaled_bias_square.max_abs_diff(&RealMatrix::zeros(1, 1)) == 0.0);
    }

    #[test]
    fn known_basis_sorts_unsorted_spectrum() {
        // p = (0.3, 0.7): the true spectrum is reported as (0.7, 0.3)
        let r = mse_monte_carlo(&params(&[0.3]), &ComplexMatrix::identity(2), 500, Strategy::KnownBasis, 200, 1).unwrap();
        assert_eq!(r.true_spectrum, vec![0.7, 0.3]);
        assert!(r.bias[0].abs() < 4.0 * (0.21 / 500.0 / 200.0f64).sqrt());
    }

    #[test]
    fn report_replays_bit_identically() {
        let p = params(&[0.5, 0.3]);
        let frame = ComplexMatrix::identity(3);
        let a = mse_monte_carlo(&p, &frame, 5000, Strategy::Adaptive { mu: 0.6 }, 2, 42).unwrap();
        let b = mse_monte_carlo(&p, &frame, 5000, Strategy::Adaptive { mu: 0.6 }, 2, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.csv_rows(), b.csv_rows());
        assert_eq!(a.csv_rows().len(), 4);
    }

    #[test]
    fn mse_report_invariants() {
        let p = params(&[0.5, 0.3]);
        let r = mse_monte_carlo(&p, &ComplexMatrix::identity(3), 20_000, Strategy::Adaptive { mu: 0.6 }, 200, 3).unwrap();
        assert!(r.mse.is_symmetric(0.0));
        // 2x2 PSD: nonnegative diagonal and determinant
        assert!(r.mse[(0, 0)] >= 0.0 && r.mse[(1, 1)] >= 0.0);
        assert!(r.mse[(0, 0)] * r.mse[(1, 1)] - r.mse[(0, 1)].powi(2) >= -1e-18);
        assert!(r.standard_errors.to_rows().iter().flatten().all(|&s| s > 0.0));
        assert!(mse_monte_carlo(&p, &ComplexMatrix::identity(3), 20_000, Strategy::KnownBasis, 1, 3).is_err());
    }

    #[test]
    fn sweep_on_maximally_mixed_is_zero() {
        let p = params(&[1.0 / 3.0, 1.0 / 3.0]);
        let t = mu_threshold_sweep(&p, &ComplexMatrix::identity(3), &[100, 1000], &[0.3, 0.6], 50, 9).unwrap();
        assert_eq!(t.rows.len(), 2 * 2 * 3);
        for r in &t.rows {
            assert!(r.scaled_bias_sq.abs() < 1e-20, "{r:?}");
        }
    }

    #[test]
    fn sweep_rejects_empty_grids() {
        let p = params(&[0.7]);
        assert!(mu_threshold_sweep(&p, &ComplexMatrix::identity(2), &[], &[0.6], 10, 1).is_err());
        assert!(mu_threshold_sweep(&p, &ComplexMatrix::identity(2), &[1000], &[], 10, 1).is_err());
    }
}
