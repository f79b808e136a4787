//! Dense complex linear algebra used across the crate.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`; this module adds the Hermitian
//! helpers the quantum layer needs (eigendecomposition with validation,
//! PSD square roots, Kronecker products, Haar-random unitaries) and the JSON
//! wire format `{"dim": d, "re": [[..]], "im": [[..]]}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Hermiticity tolerance applied to every validated state or process.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as zero in entropies and square roots.
pub const EIGEN_CLIP: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest absolute entry of `m - m†`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermitian_deviation(m) <= tol
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn reassemble(&self) -> ComplexMatrix {
        from_spectrum(&self.values, &self.vectors)
    }

    /// Applies `f` to the spectrum and reassembles.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        from_spectrum(&mapped, &self.vectors)
    }
}

/// Hermitian eigendecomposition. Non-Hermitian input is rejected rather than
/// silently symmetrized.
pub fn eigh(m: &ComplexMatrix) -> Result<Eigh> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("matrix"));
    }
    let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let deviation = hermitian_deviation(m);
    if deviation > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(eigh_unchecked(m))
}

/// Eigendecomposition of a matrix the caller already knows to be Hermitian.
/// Only the lower triangle is read.
pub(crate) fn eigh_unchecked(m: &ComplexMatrix) -> Eigh {
    let se = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let n = m.nrows();
    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(se.eigenvalues[src]);
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

pub fn from_spectrum(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= v;
        }
    }
    &scaled * vectors.adjoint()
}

/// Square root of a Hermitian PSD matrix; eigenvalues below [`EIGEN_CLIP`]
/// are clipped to zero.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = eigh(m)?;
    Ok(e.map(|v| if v > EIGEN_CLIP { v.sqrt() } else { 0.0 }))
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.iter().sum()
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// `|v⟩⟨v|`
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// Numerical rank of a real matrix from its singular values.
pub fn real_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * top.max(f64::MIN_POSITIVE)).count()
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with the
/// phases of R's diagonal folded back into Q.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random Hermitian matrix with i.i.d. Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    (&g + g.adjoint()).scale(0.5)
}

/// JSON layout shared by every square complex matrix the crate writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    /// `dim` is written as given; for process matrices it is the Hilbert-space
    /// dimension while `re`/`im` carry the d²×d² entries.
    pub fn from_matrix(dim: usize, m: &ComplexMatrix) -> Self {
        let rows =
            |f: fn(&C64) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect();
        MatrixJson { dim, re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.re.len();
        if self.im.len() != n {
            return Err(Error::Serialization("re/im row count differ".into()));
        }
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            if self.re[i].len() != n || self.im[i].len() != n {
                return Err(Error::Serialization(format!("row {i} is not of length {n}")));
            }
            for j in 0..n {
                m[(i, j)] = c(self.re[i][j], self.im[i][j]);
            }
        }
        if !all_finite(&m) {
            return Err(Error::NonFinite("matrix json"));
        }
        Ok(m)
    }
}
