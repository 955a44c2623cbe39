//! Pure-state entanglement through spectrum estimation of one reduced state.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::adaptive_estimate;
use crate::linalg::{default_tol, eig_hermitian, gell_mann_basis, ComplexMatrix, HermitianBasis};
use crate::sampling::RngStream;
use crate::scalar::Scalar;
use crate::stats::{mean, sample_variance};

/// |ψ_AB⟩ = Σ_ij C_ij |i⟩⊗|j⟩ on ℂ^d ⊗ ℂ^d.
#[derive(Clone, Debug)]
pub struct BipartitePureState<T> {
    amplitudes: ComplexMatrix<T>,
}

impl<T: Scalar> BipartitePureState<T> {
    pub fn new(amplitudes: ComplexMatrix<T>) -> Result<Self> {
        if amplitudes.dim() < 2 {
            return Err(Error::InvalidDimension(format!("local dimension must be >= 2, got {}", amplitudes.dim())));
        }
        let norm_sq = amplitudes.frobenius_norm().powi(2);
        if (norm_sq - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) {
            return Err(Error::InvalidArgument(format!("state norm² is {norm_sq}, not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Σ_k √p_k |k⟩⊗|k⟩ in the computational bases.
    pub fn from_schmidt(coefficients_sq: &[T]) -> Result<Self> {
        if coefficients_sq.iter().any(|&p| p < T::zero()) {
            return Err(Error::InvalidProbability("Schmidt weights must be nonnegative".into()));
        }
        let d = coefficients_sq.len();
        Self::new(ComplexMatrix::from_fn(d, |i, j| {
            if i == j {
                Complex::new(coefficients_sq[i].sqrt(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        }))
    }

    /// (|00⟩ + |11⟩)/√2.
    pub fn bell() -> Self {
        Self::from_schmidt(&[T::lit(0.5), T::lit(0.5)]).expect("Bell state is normalized")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.dim()
    }

    pub fn amplitudes(&self) -> &ComplexMatrix<T> {
        &self.amplitudes
    }

    /// (U ⊗ V)|ψ⟩, i.e. C ↦ U C Vᵀ.
    pub fn apply_local(&self, u: &ComplexMatrix<T>, v: &ComplexMatrix<T>) -> Result<Self> {
        let vt = ComplexMatrix::from_fn(v.dim(), |i, j| v[(j, i)]);
        Self::new(&(u * &self.amplitudes) * &vt)
    }
}

/// ρ_A = tr_B |ψ⟩⟨ψ| = C C†.
pub fn reduced_state<T: Scalar>(psi: &BipartitePureState<T>) -> ComplexMatrix<T> {
    let c = psi.amplitudes();
    (c * &c.adjoint()).hermitian_part()
}

/// Squared Schmidt coefficients, descending, clamped at zero and summing to one.
pub fn schmidt_spectrum<T: Scalar>(psi: &BipartitePureState<T>) -> Result<Vec<T>> {
    let eig = eig_hermitian(&reduced_state(psi), default_tol())?;
    let clamped: Vec<T> = eig.values.iter().map(|&x| x.max(T::zero())).collect();
    let total: T = clamped.iter().copied().sum();
    Ok(clamped.into_iter().map(|x| x / total).collect())
}

/// Shannon entropy in bits, −Σ p_k log₂ p_k, with 0·log 0 = 0.
pub fn entanglement_entropy<T: Scalar>(p: &[T]) -> Result<T> {
    if let Some(x) = p.iter().find(|&&x| x < T::zero() || !x.is_finite()) {
        return Err(Error::InvalidProbability(format!("entry {x} is negative or not finite")));
    }
    let h: T = p.iter().filter(|&&x| x > T::zero()).map(|&x| -x * x.log2()).sum();
    Ok(h.max(T::zero()))
}

/// Plug-in entropy of the adaptive spectrum estimate from measurements on
/// subsystem A only.
pub fn estimate_entanglement(
    psi: &BipartitePureState<f64>,
    n: u64,
    mu: f64,
    basis: &HermitianBasis<f64>,
    rng: &mut RngStream,
) -> Result<f64> {
    let rho_a = reduced_state(psi);
    let est = adaptive_estimate(&rho_a, n, mu, basis, rng)?;
    entanglement_entropy(&est.p_hat)
}

/// Summary of repeated entanglement estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementSummary {
    pub true_entropy: f64,
    pub estimate_mean: f64,
    pub estimate_sd: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub mu: f64,
    pub trials: u64,
}

pub fn entanglement_experiment(
    psi: &BipartitePureState<f64>,
    n: u64,
    mu: f64,
    trials: u64,
    master_seed: u64,
) -> Result<EntanglementSummary> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 trials, got {trials}")));
    }
    let basis = gell_mann_basis::<f64>(psi.dim())?;
    let estimates = (0..trials)
        .into_par_iter()
        .map(|i| estimate_entanglement(psi, n, mu, &basis, &mut RngStream::new(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntanglementSummary {
        true_entropy: entanglement_entropy(&schmidt_spectrum(psi)?)?,
        estimate_mean: mean(&estimates),
        estimate_sd: sample_variance(&estimates).sqrt(),
        n,
        mu,
        trials,
    })
}
