//! Simulation and verification toolkit for two-stage adaptive LOCC estimation
//! of a density matrix's spectrum.
//!
//! The dense linear algebra and the closed-form model are generic over the
//! real scalar (`f32` or `f64`); the Monte Carlo layers run in `f64`. The
//! aliases below fix the scalar for the common case.

pub mod bench;
pub mod entangle;
pub mod error;
pub mod estimator;
pub mod lemma;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Complex `f64` matrix.
pub type Matrix = linalg::ComplexMatrix<f64>;
/// Real `f64` matrix.
pub type RealMatrix = linalg::RealMatrix<f64>;
/// 𝔰𝔲(d) generator basis in `f64`.
pub type Basis = linalg::HermitianBasis<f64>;
/// Eigendecomposition in `f64`.
pub type EigenSystem = linalg::EigenSystem<f64>;
/// Spectrum parameters in `f64`.
pub type Spectrum = model::SpectrumParams<f64>;
/// Single precision variants.
pub type Matrix32 = linalg::ComplexMatrix<f32>;
pub type Spectrum32 = model::SpectrumParams<f32>;
