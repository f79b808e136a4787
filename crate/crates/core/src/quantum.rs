//! States and the scalar figures of merit computed on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, all_finite, c, eigh, hermitian_deviation, ComplexMatrix, ComplexVector, MatrixJson, C64, EIGEN_CLIP,
    HERMITIAN_TOL,
};

const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-12;

/// A d×d Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if !all_finite(&matrix) {
            return Err(Error::NonFinite("density matrix"));
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace { trace });
        }
        let min_eigenvalue = linalg::eigh_unchecked(&matrix).values[0];
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(DensityMatrix { matrix })
    }

    /// Symmetrizes and divides by the trace before validating. Intended for
    /// outputs of numerical pipelines that are correct up to roundoff.
    pub fn from_unnormalized(matrix: ComplexMatrix) -> Result<Self> {
        let h = (&matrix + matrix.adjoint()).scale(0.5);
        let trace = h.trace().re;
        if !(trace.is_finite() && trace > 0.0) {
            return Err(Error::BadTrace { trace });
        }
        Self::new(h.unscale(trace))
    }

    pub fn from_pure(state: &PureState) -> Self {
        DensityMatrix { matrix: linalg::outer(state.amplitudes()) }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix { matrix: ComplexMatrix::identity(d, d).unscale(d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh_unchecked(&self.matrix).values
    }

    /// `⟨v|ρ|v⟩`
    pub fn expectation(&self, v: &ComplexVector) -> f64 {
        (v.adjoint() * &self.matrix * v)[(0, 0)].re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(self.dim(), &self.matrix)
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        let m = json.to_matrix()?;
        if m.nrows() != json.dim {
            return Err(Error::DimensionMismatch { expected: json.dim, got: m.nrows() });
        }
        Self::new(m)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = MatrixJson::deserialize(d)?;
        DensityMatrix::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite("amplitudes"));
        }
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(PureState { amplitudes })
    }

    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Ok(PureState { amplitudes: amplitudes.unscale(norm) })
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(ComplexVector::from_column_slice(amplitudes))
    }

    /// Computational basis vector `|n⟩` (0-based).
    pub fn basis(d: usize, n: usize) -> Self {
        let mut v = ComplexVector::zeros(d);
        v[n] = c(1.0, 0.0);
        PureState { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        linalg::outer(&self.amplitudes)
    }

    /// `|⟨self|other⟩|²`
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// Uhlmann fidelity `(Tr√(√a b √a))²`, evaluated as the squared trace norm of
/// `√a √b` so that it is symmetric to roundoff.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let sa = linalg::sqrt_psd(a.matrix())?;
    let sb = linalg::sqrt_psd(b.matrix())?;
    let f = linalg::trace_norm(&(sa * sb)).powi(2);
    Ok(f.clamp(0.0, 1.0))
}

/// `⟨ψ|ρ|ψ⟩`, the fidelity against a pure reference.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: psi.dim() });
    }
    Ok(rho.expectation(psi.amplitudes()).clamp(0.0, 1.0))
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    spectral_entropy(&linalg::eigh_unchecked(rho.matrix()).values)
}

/// Entropy in bits of any Hermitian PSD matrix with unit trace (for example
/// a Choi state that has not been wrapped as a [`DensityMatrix`]).
pub fn matrix_entropy(m: &ComplexMatrix) -> Result<f64> {
    Ok(spectral_entropy(&eigh(m)?.values))
}

pub(crate) fn spectral_entropy(values: &[f64]) -> f64 {
    values.iter().filter(|&&p| p > EIGEN_CLIP).map(|&p| -p * p.log2()).sum::<f64>().max(0.0)
}
