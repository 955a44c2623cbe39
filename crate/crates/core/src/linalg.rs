//! Small dense complex Hermitian linear algebra.
//!
//! Everything here targets the tiny dimensions of qudit density matrices
//! (d up to ~16). Matrices are stored densely in row-major order.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cap on the number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Default off-diagonal convergence threshold for [`eig_hermitian`] at `f64`.
pub const JACOBI_TOL: f64 = 1e-13;

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex::new(T::zero(), T::zero()); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    /// Matrix whose k-th column is `columns[k]`.
    pub fn from_columns(columns: &[Vec<Complex<T>>]) -> Result<Self> {
        let dim = columns.len();
        for c in columns {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
            }
        }
        Ok(Self::from_fn(dim, |i, j| columns[j][i]))
    }

    /// Rank-one projector |v⟩⟨v|.
    pub fn outer(v: &[Complex<T>]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn column(&self, k: usize) -> Vec<Complex<T>> {
        (0..self.dim).map(|i| self[(i, k)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self[(i, i)]).fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    /// tr(A B) without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex<T> {
        let n = self.dim;
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// Frobenius (Hilbert–Schmidt) norm √Σ|a_ij|².
    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// (H + H†)/2.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * half)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// ⟨v|A|v⟩ (real part is the expectation for Hermitian A).
    pub fn expectation(&self, v: &[Complex<T>]) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.dim {
            let mut row = Complex::new(T::zero(), T::zero());
            for j in 0..self.dim {
                row += self[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc
    }

    /// U A U†.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Scalar> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl<T: Scalar> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = &self[(i, j)];
                write!(f, " ({:?}, {:?})", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Dense real matrix, row-major. Used for QFI and MSE matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> RealMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, got: bad.len() });
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Embeds into a complex matrix so the Hermitian eigensolver applies.
    pub fn to_complex(&self) -> ComplexMatrix<T> {
        assert_eq!(self.rows, self.cols);
        ComplexMatrix::from_fn(self.rows, |i, j| Complex::new(self[(i, j)], T::zero()))
    }
}

impl<T> Index<(usize, usize)> for RealMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for RealMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Orthonormal traceless Hermitian generators of 𝔰𝔲(d), tr(T_α T_β) = δ_αβ.
#[derive(Clone, Debug)]
pub struct HermitianBasis<T> {
    dim: usize,
    generators: Vec<ComplexMatrix<T>>,
}

impl<T: Scalar> HermitianBasis<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[ComplexMatrix<T>] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Coordinates θ_α = tr(A T_α) of the traceless part of a Hermitian A.
    pub fn coordinates(&self, a: &ComplexMatrix<T>) -> Vec<T> {
        self.generators.iter().map(|t| a.trace_product(t).re).collect()
    }

    /// Σ_α c_α T_α.
    pub fn combine(&self, coeffs: &[T]) -> ComplexMatrix<T> {
        assert_eq!(coeffs.len(), self.generators.len());
        let mut out = ComplexMatrix::zeros(self.dim);
        for (c, t) in coeffs.iter().zip(&self.generators) {
            for (o, g) in out.data.iter_mut().zip(&t.data) {
                *o += g * *c;
            }
        }
        out
    }
}

/// Generalized Gell-Mann basis, each generator normalized to tr(T²) = 1.
///
/// Order: the (d²−d)/2 symmetric generators (|j⟩⟨k| + |k⟩⟨j|)/√2, then the
/// (d²−d)/2 antisymmetric generators (−i|j⟩⟨k| + i|k⟩⟨j|)/√2, both for j < k
/// in lexicographic order, then the d−1 diagonal generators
/// (Σ_{m<l} |m⟩⟨m| − l|l⟩⟨l|)/√(l(l+1)) for l = 1..d−1 (zero-based indices).
///
/// For d = 2 this yields (σ_x, σ_y, σ_z)/√2.
pub fn gell_mann_basis<T: Scalar>(d: usize) -> Result<HermitianBasis<T>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("Gell-Mann basis needs d >= 2, got {d}")));
    }
    let zero = T::zero();
    let inv_sqrt2 = T::FRAC_1_SQRT_2();
    let mut generators = Vec::with_capacity(d * d - 1);

    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d);
            m[(j, k)] = Complex::new(inv_sqrt2, zero);
            m[(k, j)] = Complex::new(inv_sqrt2, zero);
            generators.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d);
            m[(j, k)] = Complex::new(zero, -inv_sqrt2);
            m[(k, j)] = Complex::new(zero, inv_sqrt2);
            generators.push(m);
        }
    }
    for l in 1..d {
        let lf = T::from_usize_lossy(l);
        let norm = (lf * (lf + T::one())).sqrt();
        let mut m = ComplexMatrix::zeros(d);
        for mm in 0..l {
            m[(mm, mm)] = Complex::new(T::one() / norm, zero);
        }
        m[(l, l)] = Complex::new(-lf / norm, zero);
        generators.push(m);
    }
    Ok(HermitianBasis { dim: d, generators })
}

/// Eigenvalues (descending) with orthonormal eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct EigenSystem<T> {
    pub values: Vec<T>,
    pub vectors: ComplexMatrix<T>,
}

impl<T: Scalar> EigenSystem<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        self.vectors.column(k)
    }

    /// Σ_k λ_k v_k v_k†.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let d = self.dim();
        ComplexMatrix::from_fn(d, |i, j| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..d {
                acc += self.vectors[(i, k)] * self.vectors[(j, k)].conj() * self.values[k];
            }
            acc
        })
    }
}

/// Frobenius norm of V†V − I for a matrix whose columns should be orthonormal.
pub fn gram_residual<T: Scalar>(columns: &ComplexMatrix<T>) -> T {
    let g = &columns.adjoint() * columns;
    (&g - &ComplexMatrix::identity(columns.dim())).frobenius_norm()
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The input is symmetrized to (H + H†)/2 first. Iteration stops when the
/// off-diagonal Frobenius norm drops below `tol · max(1, ‖H‖_HS)`, or fails
/// after [`JACOBI_MAX_SWEEPS`] sweeps. Eigenvalues come back sorted descending;
/// degenerate eigenspaces get whatever orthonormal basis the rotations produce.
pub fn eig_hermitian<T: Scalar>(h: &ComplexMatrix<T>, tol: T) -> Result<EigenSystem<T>> {
    jacobi(h, tol, JACOBI_MAX_SWEEPS)
}

fn jacobi<T: Scalar>(h: &ComplexMatrix<T>, tol: T, max_sweeps: usize) -> Result<EigenSystem<T>> {
    if !(tol >= T::zero()) {
        return Err(Error::InvalidArgument(format!("eigensolver tolerance must be >= 0, got {tol}")));
    }
    if !h.is_finite() {
        return Err(Error::NonFinite("eig_hermitian input"));
    }
    let n = h.dim();
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::<T>::identity(n);
    let threshold = tol * T::one().max(a.frobenius_norm());

    let off_norm = |a: &ComplexMatrix<T>| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = n < 2 || off_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < max_sweeps {
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = off_norm(&a) <= threshold;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps, off_norm: off_norm(&a).to_f64_lossy() });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, k| v[(i, order[k])]);
    Ok(EigenSystem { values, vectors })
}

/// One Jacobi rotation zeroing a[p][q]. With a_pq = |a_pq| e^{iφ}, the
/// unitary G acting on columns (p, q) is
///   G_pp = c, G_pq = s, G_qp = −s e^{−iφ}, G_qq = c e^{−iφ},
/// i.e. a phase fix making a_pq real followed by the real symmetric rotation.
fn rotate<T: Scalar>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == T::zero() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / mag; // e^{iφ}
    let phase_c = phase.conj();

    let theta = (aqq - app) / (T::lit(2.0) * mag);
    let t = if theta.is_infinite() {
        T::zero()
    } else {
        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
        sign / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    let n = a.dim();
    let g_pp = Complex::new(c, T::zero());
    let g_pq = Complex::new(s, T::zero());
    let g_qp = phase_c * (-s);
    let g_qq = phase_c * c;

    // A ← A G
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * g_pp + aiq * g_qp;
        a[(i, q)] = aip * g_pq + aiq * g_qq;
    }
    // A ← G† A
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = g_pp.conj() * apj + g_qp.conj() * aqj;
        a[(q, j)] = g_pq.conj() * apj + g_qq.conj() * aqj;
    }
    // V ← V G
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * g_pp + viq * g_qp;
        v[(i, q)] = vip * g_pq + viq * g_qq;
    }

    a[(p, q)] = Complex::new(T::zero(), T::zero());
    a[(q, p)] = Complex::new(T::zero(), T::zero());
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
}

/// Hilbert–Schmidt distance √tr((A − B)²) between Hermitian matrices.
pub fn hs_distance<T: Scalar>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<T> {
    a.check_same_dim(b)?;
    let diff = a - b;
    // tr(D²) = tr(D D†) for Hermitian D; clamp tiny negative round-off.
    Ok(diff.trace_product(&diff).re.max(T::zero()).sqrt())
}

/// exp(i Σ_α η_α T_α), evaluated through the eigendecomposition of the exponent.
pub fn unitary_from_generators<T: Scalar>(eta: &[T], basis: &HermitianBasis<T>) -> Result<ComplexMatrix<T>> {
    if eta.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: eta.len() });
    }
    if eta.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("generator coefficients"));
    }
    let exponent = basis.combine(eta);
    let eig = eig_hermitian(&exponent, default_tol::<T>())?;
    let d = basis.dim();
    let phases: Vec<Complex<T>> = eig.values.iter().map(|&l| Complex::new(l.cos(), l.sin())).collect();
    Ok(ComplexMatrix::from_fn(d, |i, j| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in 0..d {
            acc += eig.vectors[(i, k)] * phases[k] * eig.vectors[(j, k)].conj();
        }
        acc
    }))
}

/// Jacobi threshold suited to the scalar's precision.
pub fn default_tol<T: Scalar>() -> T {
    T::lit(JACOBI_TOL).max(T::epsilon() * T::lit(16.0))
}

/// Largest Gram residual accepted for a measurement frame: 1e-10 in f64,
/// a few hundred ulps in lower precision.
pub fn frame_tol<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(256.0))
}
