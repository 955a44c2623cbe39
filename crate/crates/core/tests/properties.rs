//! Property-based invariants of the numerical core.

use std::f64::consts::PI;

use locc_spectrum::entangle::{entanglement_entropy, schmidt_spectrum, BipartitePureState};
use locc_spectrum::estimator::split_copies;
use locc_spectrum::lemma::{matching_sets, perturbed_sigma, spectral_structure, LEMMA_SLACK, MERGE_TOL};
use locc_spectrum::linalg::{
    default_tol, eig_hermitian, gell_mann_basis, gram_residual, hs_distance, unitary_from_generators, ComplexMatrix,
};
use locc_spectrum::model::{qfi, qfi_from_slds, qfi_inverse, rho_from_spectrum};
use locc_spectrum::sampling::RngStream;
use locc_spectrum::{Matrix, RealMatrix, Spectrum};
use proptest::prelude::*;

/// Probability vector of length d with every entry ≥ floor/d.
fn probabilities(d: usize, floor: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(floor..1.0f64, d).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn generators(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-PI..PI, d * d - 1)
}

/// (d, spectrum, frame angles).
fn model(max_d: usize, floor: f64) -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (2..=max_d).prop_flat_map(move |d| (Just(d), probabilities(d, floor), generators(d)))
}

fn unitary(d: usize, eta: &[f64]) -> Matrix {
    unitary_from_generators(eta, &gell_mann_basis(d).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gell_mann_orthonormal_traceless_hermitian(d in 2usize..=8) {
        let basis = gell_mann_basis::<f64>(d).unwrap();
        prop_assert_eq!(basis.len(), d * d - 1);
        for (a, ta) in basis.generators().iter().enumerate() {
            prop_assert!(ta.trace().norm() < 1e-14);
            prop_assert!(ta.hermiticity_residual() < 1e-15);
            for (b, tb) in basis.generators().iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((ta.trace_product(tb).re - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn basis_coordinates_round_trip((d, _p, eta) in model(5, 0.01)) {
        let basis = gell_mann_basis::<f64>(d).unwrap();
        let coords = basis.coordinates(&basis.combine(&eta));
        for (a, b) in coords.iter().zip(&eta) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_recovers_constructed_spectrum((d, p, eta) in model(6, 0.01)) {
        let spec = Spectrum::from_full(&p).unwrap();
        let rho = rho_from_spectrum(&spec, &unitary(d, &eta)).unwrap();
        let eig = eig_hermitian(&rho, default_tol()).unwrap();
        let mut want = p.clone();
        want.sort_by(|a, b| b.total_cmp(a));
        for (got, w) in eig.values.iter().zip(&want) {
            prop_assert!((got - w).abs() < 1e-10, "{:?} vs {:?}", eig.values, want);
        }
        prop_assert!(gram_residual(&eig.vectors) < 1e-10);
        prop_assert!(hs_distance(&eig.reconstruct(), &rho).unwrap() < 1e-10);
    }

    #[test]
    fn unitary_inverse_is_negated_generators((d, _p, eta) in model(4, 0.01)) {
        let u = unitary(d, &eta);
        let neg: Vec<f64> = eta.iter().map(|x| -x).collect();
        let v = unitary(d, &neg);
        prop_assert!((&v - &u.adjoint()).frobenius_norm() < 1e-10);
        prop_assert!((&(&u * &v) - &Matrix::identity(d)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn hs_distance_is_a_unitarily_invariant_metric(
        (d, p, eta) in model(4, 0.01),
        q_seed in proptest::collection::vec(0.01..1.0f64, 4),
        r_seed in proptest::collection::vec(0.01..1.0f64, 4),
    ) {
        let norm = |w: &[f64]| { let s: f64 = w[..d].iter().sum(); w[..d].iter().map(|x| x / s).collect::<Vec<_>>() };
        let u = unitary(d, &eta);
        let a = rho_from_spectrum(&Spectrum::from_full(&p).unwrap(), &Matrix::identity(d)).unwrap();
        let b = rho_from_spectrum(&Spectrum::from_full(&norm(&q_seed)).unwrap(), &u).unwrap();
        let c = rho_from_spectrum(&Spectrum::from_full(&norm(&r_seed)).unwrap(), &u.adjoint()).unwrap();
        let ab = hs_distance(&a, &b).unwrap();
        prop_assert_eq!(hs_distance(&a, &a).unwrap(), 0.0);
        prop_assert!((ab - hs_distance(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(ab <= hs_distance(&a, &c).unwrap() + hs_distance(&c, &b).unwrap() + 1e-14);
        let rotated = hs_distance(&a.conjugate_by(&u), &b.conjugate_by(&u)).unwrap();
        prop_assert!((ab - rotated).abs() < 1e-12);
    }

    #[test]
    fn qfi_agrees_with_slds_and_inverts((_d, p, _eta) in model(6, 0.05)) {
        let spec = Spectrum::from_full(&p).unwrap();
        let h = qfi(&spec).unwrap();
        prop_assert!(h.is_symmetric(0.0));
        let from_slds = qfi_from_slds(&spec).unwrap();
        let scale = h.to_rows().iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!(h.max_abs_diff(&from_slds) < 1e-10 * scale);
        let eye = RealMatrix::identity(h.rows());
        prop_assert!(h.matmul(&qfi_inverse(&spec)).max_abs_diff(&eye) < 1e-10);
    }

    #[test]
    fn schmidt_spectrum_invariant_under_local_unitaries(
        (d, p, eta) in model(4, 0.01),
        other in proptest::collection::vec(-PI..PI, 15),
    ) {
        let psi = BipartitePureState::from_schmidt(&p).unwrap();
        let rotated = psi.apply_local(&unitary(d, &eta), &unitary(d, &other[..d * d - 1])).unwrap();
        let a = schmidt_spectrum(&psi).unwrap();
        let b = schmidt_spectrum(&rotated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let e = entanglement_entropy(&b).unwrap();
        prop_assert!(e >= 0.0 && e <= (d as f64).log2() + 1e-12);
    }

    #[test]
    fn copy_split_accounts_for_every_copy(n in 3u64..10_000_000, mu in 0.05f64..0.95, d in 2usize..=4) {
        match split_copies(n, mu, d) {
            Ok(s) => {
                prop_assert_eq!(s.initial + s.r#final, n);
                prop_assert_eq!(s.initial, s.per_generator * (d * d - 1) as u64);
                prop_assert!(s.per_generator >= 1 && s.r#final >= 1);
            }
            Err(_) => prop_assert!(n <= 2 * (d * d - 1) as u64),
        }
    }

    #[test]
    fn matching_sets_partition_indices_at_admissible_radius((d, p, eta) in model(4, 0.05), seed in any::<u64>()) {
        let rho = rho_from_spectrum(&Spectrum::from_full(&p).unwrap(), &unitary(d, &eta)).unwrap();
        let structure = spectral_structure(&rho, MERGE_TOL);
        // spectra that are all equal carry no gap
        prop_assume!(structure.is_ok());
        let structure = structure.unwrap();
        let mut rng = RngStream::new(seed, 0);
        let delta = 0.99 * structure.admissible_radius();
        let sigma = perturbed_sigma(&rho, delta, &mut rng, &gell_mann_basis(d).unwrap()).unwrap().sigma;
        prop_assert!(hs_distance(&rho, &sigma).unwrap() <= delta * (1.0 + 1e-12));
        let s = eig_hermitian(&sigma, default_tol()).unwrap();
        let sets = matching_sets(&structure.values, &s.values, delta, LEMMA_SLACK);
        prop_assert!(sets.pairwise_disjoint());
        prop_assert!(sets.covers(d));
        prop_assert_eq!(sets.sizes(), structure.degeneracies.clone());
    }
}

#[test]
fn f32_eigensolver_on_small_model() {
    let spec = locc_spectrum::Spectrum32::new(vec![0.6, 0.3]).unwrap();
    let u = unitary_from_generators(&[0.2f32, -0.4, 0.1, 0.3, 0.0, 0.5, -0.2, 0.1], &gell_mann_basis(3).unwrap()).unwrap();
    let rho: ComplexMatrix<f32> = rho_from_spectrum(&spec, &u).unwrap();
    let eig = eig_hermitian(&rho, default_tol()).unwrap();
    for (got, want) in eig.values.iter().zip([0.6f32, 0.3, 0.1]) {
        assert!((got - want).abs() < 1e-5);
    }
}
