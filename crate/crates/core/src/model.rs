//! Spectrum submodel ρ(p) = Σ_k p_k |k⟩⟨k| with known closed forms for the
//! symmetric logarithmic derivatives and the quantum Fisher information.
//!
//! Indices are zero-based: free parameters are p_0..p_{d−2} and the implied
//! last eigenvalue is p_{d−1} = 1 − Σ p_k.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frame_tol, gram_residual, ComplexMatrix, RealMatrix};
use crate::scalar::Scalar;

/// Smallest eigenvalue accepted where the model must be regular.
pub const INTERIOR_MARGIN: f64 = 1e-9;

/// Slack on the Θ membership checks (sum and entry bounds).
const THETA_SLACK: f64 = 1e-12;

/// Free eigenvalues p ∈ Θ ⊂ ℝ^{d−1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams<T> {
    p: Vec<T>,
}

impl<T: Scalar> SpectrumParams<T> {
    /// Validates membership in Θ: every p_k ∈ [0,1] and Σ p_k ≤ 1.
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDimension("spectrum needs at least one free parameter (d >= 2)".into()));
        }
        let slack = T::lit(THETA_SLACK);
        for (k, &pk) in p.iter().enumerate() {
            if !pk.is_finite() || pk < -slack || pk > T::one() + slack {
                return Err(Error::OutsideParameterSpace(format!("p[{k}] = {pk} is not in [0, 1]")));
            }
        }
        let sum: T = p.iter().copied().sum();
        if sum > T::one() + slack {
            return Err(Error::OutsideParameterSpace(format!("sum of free eigenvalues {sum} exceeds 1")));
        }
        Ok(Self { p })
    }

    /// Uses the first d−1 entries of a full probability vector.
    pub fn from_full(full: &[T]) -> Result<Self> {
        if full.len() < 2 {
            return Err(Error::InvalidDimension(format!("need d >= 2 eigenvalues, got {}", full.len())));
        }
        let total: T = full.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::OutsideParameterSpace(format!("eigenvalues sum to {total}, not 1")));
        }
        Self::new(full[..full.len() - 1].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.p.len() + 1
    }

    pub fn free(&self) -> &[T] {
        &self.p
    }

    /// p_{d−1} = 1 − Σ p_k, clamped at zero.
    pub fn last(&self) -> T {
        (T::one() - self.p.iter().copied().sum::<T>()).max(T::zero())
    }

    /// All d eigenvalues, implied one last.
    pub fn full(&self) -> Vec<T> {
        let mut v = self.p.clone();
        v.push(self.last());
        v
    }

    /// All d eigenvalues sorted descending.
    pub fn sorted_descending(&self) -> Vec<T> {
        let mut v = self.full();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        v
    }

    pub fn is_interior(&self) -> bool {
        let margin = T::lit(INTERIOR_MARGIN);
        self.full().iter().all(|&x| x >= margin)
    }

    fn require_interior(&self) -> Result<()> {
        let margin = T::lit(INTERIOR_MARGIN);
        if let Some((k, x)) = self.full().iter().enumerate().find(|(_, &x)| x < margin) {
            return Err(Error::SingularModel(format!("eigenvalue p[{k}] = {x} is below {INTERIOR_MARGIN:e}")));
        }
        Ok(())
    }
}

/// Quantum Fisher information H(p), or its inverse, as a (d−1)×(d−1) matrix.
pub type QfiMatrix<T> = RealMatrix<T>;

/// ρ = Σ_k p_k |ψ_k⟩⟨ψ_k| with |ψ_k⟩ the k-th column of `frame`.
pub fn rho_from_spectrum<T: Scalar>(params: &SpectrumParams<T>, frame: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let d = params.dim();
    if frame.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: frame.dim() });
    }
    let residual = gram_residual(frame);
    if residual > frame_tol() {
        return Err(Error::NotOrthonormal { residual: residual.to_f64_lossy() });
    }
    let p = params.full();
    let rho = ComplexMatrix::from_fn(d, |i, j| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, &pk) in p.iter().enumerate() {
            acc += frame[(i, k)] * frame[(j, k)].conj() * pk;
        }
        acc
    });
    Ok(rho.hermitian_part())
}

/// ∂ρ/∂p_k = |k⟩⟨k| − |d⟩⟨d| in eigenbasis coordinates.
pub fn rho_derivative<T: Scalar>(params: &SpectrumParams<T>, k: usize) -> Result<ComplexMatrix<T>> {
    let d = params.dim();
    check_index(k, d)?;
    let mut diag = vec![T::zero(); d];
    diag[k] = T::one();
    diag[d - 1] = -T::one();
    Ok(ComplexMatrix::from_real_diagonal(&diag))
}

/// Symmetric logarithmic derivative λ_k = |k⟩⟨k|/p_k − |d⟩⟨d|/p_d, in
/// eigenbasis coordinates.
pub fn sld<T: Scalar>(params: &SpectrumParams<T>, k: usize) -> Result<ComplexMatrix<T>> {
    let d = params.dim();
    check_index(k, d)?;
    params.require_interior()?;
    let p = params.full();
    let mut diag = vec![T::zero(); d];
    diag[k] = T::one() / p[k];
    diag[d - 1] = -T::one() / p[d - 1];
    Ok(ComplexMatrix::from_real_diagonal(&diag))
}

/// H(p)_{kl} = δ_{kl}/p_k + 1/p_d.
pub fn qfi<T: Scalar>(params: &SpectrumParams<T>) -> Result<QfiMatrix<T>> {
    params.require_interior()?;
    let p = params.free();
    let inv_last = T::one() / params.last();
    let n = p.len();
    Ok(RealMatrix::from_fn(n, n, |k, l| if k == l { T::one() / p[k] + inv_last } else { inv_last }))
}

/// H(p)_{kl} = Re tr[ρ λ_k λ_l], assembled from the SLD matrices.
pub fn qfi_from_slds<T: Scalar>(params: &SpectrumParams<T>) -> Result<QfiMatrix<T>> {
    let d = params.dim();
    let rho = ComplexMatrix::from_real_diagonal(&params.full());
    let slds = (0..d - 1).map(|k| sld(params, k)).collect::<Result<Vec<_>>>()?;
    Ok(RealMatrix::from_fn(d - 1, d - 1, |k, l| (&rho * &slds[k]).trace_product(&slds[l]).re))
}

/// H⁻¹(p)_{kl} = p_k δ_{kl} − p_k p_l, valid on all of Θ.
pub fn qfi_inverse<T: Scalar>(params: &SpectrumParams<T>) -> QfiMatrix<T> {
    let p = params.free();
    let n = p.len();
    RealMatrix::from_fn(n, n, |k, l| if k == l { p[k] - p[k] * p[l] } else { -p[k] * p[l] })
}

fn check_index(k: usize, d: usize) -> Result<()> {
    if k + 1 >= d {
        return Err(Error::InvalidArgument(format!("parameter index {k} out of range for d = {d}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_hermitian, gell_mann_basis, unitary_from_generators, JACOBI_TOL};

    fn params(p: &[f64]) -> SpectrumParams<f64> {
        SpectrumParams::new(p.to_vec()).unwrap()
    }

    #[test]
    fn theta_membership() {
        assert!(SpectrumParams::new(vec![1.2]).is_err());
        assert!(SpectrumParams::new(vec![-0.1]).is_err());
        assert!(SpectrumParams::new(vec![0.6, 0.5]).is_err());
        assert!(SpectrumParams::<f64>::new(vec![]).is_err());
        assert!(SpectrumParams::new(vec![0.0, 1.0]).is_ok());
        assert_eq!(params(&[0.5, 0.3]).dim(), 3);
        assert!((params(&[0.5, 0.3]).last() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rho_standard_basis() {
        let id = ComplexMatrix::identity(2);
        let rho = rho_from_spectrum(&params(&[0.5]), &id).unwrap();
        assert!((&rho - &ComplexMatrix::identity(2).scale(0.5)).frobenius_norm() < 1e-15);
        let rho = rho_from_spectrum(&params(&[0.7]), &id).unwrap();
        assert!((&rho - &ComplexMatrix::from_real_diagonal(&[0.7, 0.3])).frobenius_norm() < 1e-15);
    }

    #[test]
    fn rho_random_frame_has_requested_spectrum() {
        let basis = gell_mann_basis::<f64>(3).unwrap();
        let eta: Vec<f64> = (0..8).map(|i| 0.37 * (i as f64 + 1.0).sin()).collect();
        let u = unitary_from_generators(&eta, &basis).unwrap();
        let rho = rho_from_spectrum(&params(&[0.5, 0.3]), &u).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let e = eig_hermitian(&rho, JACOBI_TOL).unwrap();
        for (got, want) in e.values.iter().zip([0.5, 0.3, 0.2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_rejects_bad_frame() {
        let mut f = ComplexMatrix::<f64>::identity(2);
        f[(0, 1)] = Complex::new(0.3, 0.0);
        assert!(matches!(rho_from_spectrum(&params(&[0.7]), &f), Err(Error::NotOrthonormal { .. })));
    }

    #[test]
    fn sld_closed_forms() {
        let l = sld(&params(&[0.5]), 0).unwrap();
        assert!((&l - &ComplexMatrix::from_real_diagonal(&[2.0, -2.0])).frobenius_norm() < 1e-15);
        let l = sld(&params(&[0.5, 0.3]), 1).unwrap();
        assert!((&l - &ComplexMatrix::from_real_diagonal(&[0.0, 10.0 / 3.0, -5.0])).frobenius_norm() < 1e-13);
    }

    #[test]
    fn sld_solves_defining_equation() {
        for p in [vec![0.5, 0.3], vec![0.1, 0.6], vec![0.25, 0.25]] {
            let sp = params(&p);
            let rho = ComplexMatrix::from_real_diagonal(&sp.full());
            for k in 0..sp.dim() - 1 {
                let l = sld(&sp, k).unwrap();
                let sym = (&(&rho * &l) + &(&l * &rho)).scale(0.5);
                let residual = (&sym - &rho_derivative(&sp, k).unwrap()).frobenius_norm();
                assert!(residual <= 1e-12);
            }
        }
    }

    #[test]
    fn sld_rejects_boundary() {
        assert!(matches!(sld(&params(&[1.0]), 0), Err(Error::SingularModel(_))));
        assert!(matches!(sld(&params(&[0.5, 0.0]), 0), Err(Error::SingularModel(_))));
        assert!(sld(&params(&[0.5]), 1).is_err());
    }

    #[test]
    fn qfi_examples() {
        let h = qfi(&params(&[0.5])).unwrap();
        assert!((h[(0, 0)] - 4.0).abs() < 1e-15);
        let h = qfi(&params(&[0.5, 0.3])).unwrap();
        let want = RealMatrix::from_rows(&[vec![7.0, 5.0], vec![5.0, 25.0 / 3.0]]).unwrap();
        assert!(h.max_abs_diff(&want) < 1e-12);
        assert!(matches!(qfi(&params(&[0.0, 0.5])), Err(Error::SingularModel(_))));
    }

    #[test]
    fn qfi_matches_sld_trace_form() {
        for p in [vec![0.5, 0.3], vec![0.2, 0.2, 0.2], vec![0.9]] {
            let sp = params(&p);
            assert!(qfi(&sp).unwrap().max_abs_diff(&qfi_from_slds(&sp).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn qfi_inverse_examples() {
        let hi = qfi_inverse(&params(&[0.5]));
        assert!((hi[(0, 0)] - 0.25).abs() < 1e-15);
        let hi = qfi_inverse(&params(&[0.5, 0.3]));
        let want = RealMatrix::from_rows(&[vec![0.25, -0.15], vec![-0.15, 0.21]]).unwrap();
        assert!(hi.max_abs_diff(&want) < 1e-15);
        // closed form is defined on the boundary as well
        let hb = qfi_inverse(&params(&[1.0, 0.0]));
        assert!(hb.max_abs_diff(&RealMatrix::zeros(2, 2)) < 1e-15);
    }

    #[test]
    fn qfi_times_inverse_is_identity() {
        let sp = params(&[0.5, 0.3]);
        let prod = qfi(&sp).unwrap().matmul(&qfi_inverse(&sp));
        assert!(prod.max_abs_diff(&RealMatrix::identity(2)) < 1e-10);
    }

    #[test]
    fn generic_over_f32() {
        let sp = SpectrumParams::<f32>::new(vec![0.5, 0.3]).unwrap();
        let prod = qfi(&sp).unwrap().matmul(&qfi_inverse(&sp));
        assert!(prod.max_abs_diff(&RealMatrix::identity(2)) < 1e-5);
    }
}
