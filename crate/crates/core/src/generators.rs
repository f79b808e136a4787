//! Identity plus generalized Gell-Mann matrices, the operator basis used for
//! state decompositions and for process (χ) matrices.
//!
//! Canonical order: `λ₀ = I`, then the symmetric family for pairs `(n, m)`,
//! `n < m` in lexicographic order, then the antisymmetric family in the same
//! pair order, then the `d − 1` diagonal generators. Non-identity elements are
//! normalized to `Tr(λᵢλⱼ) = 2δᵢⱼ`.

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorFamily {
    Identity,
    Symmetric { n: usize, m: usize },
    Antisymmetric { n: usize, m: usize },
    Diagonal { level: usize },
}

#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    dim: usize,
    operators: Vec<ComplexMatrix>,
    families: Vec<GeneratorFamily>,
}

/// Builds the `d²` operators for `2 ≤ d ≤ 16`.
pub fn su_generators(d: usize) -> Result<GeneratorBasis> {
    if !(MIN_DIM..=MAX_DIM).contains(&d) {
        return Err(Error::DimensionOutOfRange { got: d, min: MIN_DIM, max: MAX_DIM });
    }
    let mut operators = Vec::with_capacity(d * d);
    let mut families = Vec::with_capacity(d * d);
    operators.push(ComplexMatrix::identity(d, d));
    families.push(GeneratorFamily::Identity);

    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|n| (n + 1..d).map(move |m| (n, m))).collect();
    for &(n, m) in &pairs {
        let mut s = ComplexMatrix::zeros(d, d);
        s[(n, m)] = c(1.0, 0.0);
        s[(m, n)] = c(1.0, 0.0);
        operators.push(s);
        families.push(GeneratorFamily::Symmetric { n, m });
    }
    for &(n, m) in &pairs {
        let mut a = ComplexMatrix::zeros(d, d);
        a[(n, m)] = c(0.0, -1.0);
        a[(m, n)] = c(0.0, 1.0);
        operators.push(a);
        families.push(GeneratorFamily::Antisymmetric { n, m });
    }
    for level in 1..d {
        let norm = (2.0 / (level * (level + 1)) as f64).sqrt();
        let mut z = ComplexMatrix::zeros(d, d);
        for j in 0..level {
            z[(j, j)] = c(norm, 0.0);
        }
        z[(level, level)] = c(-(level as f64) * norm, 0.0);
        operators.push(z);
        families.push(GeneratorFamily::Diagonal { level });
    }
    Ok(GeneratorBasis { dim: d, operators, families })
}

impl GeneratorBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &ComplexMatrix {
        &self.operators[i]
    }

    pub fn family(&self, i: usize) -> GeneratorFamily {
        self.families[i]
    }

    /// `Tr(λᵢ²)`: `d` for the identity, 2 otherwise.
    pub fn norm_sq(&self, i: usize) -> f64 {
        if i == 0 {
            self.dim as f64
        } else {
            2.0
        }
    }

    /// Coefficients `cᵢ` with `m = Σ cᵢ λᵢ`. Real when `m` is Hermitian.
    pub fn decompose(&self, m: &ComplexMatrix) -> Vec<num_complex::Complex64> {
        self.operators.iter().enumerate().map(|(i, op)| trace_product(op, m) / self.norm_sq(i)).collect()
    }

    pub fn reconstruct(&self, coefficients: &[num_complex::Complex64]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (coef, op) in coefficients.iter().zip(&self.operators) {
            out += op * *coef;
        }
        out
    }

    /// Expectation values `rᵢ = Tr(ρ λᵢ)`. With `Tr(λᵢ²) = 2` the state is
    /// recovered as `ρ = I/d + ½ Σ_{i>0} rᵢ λᵢ`.
    pub fn expectation_values(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.operators.iter().map(|op| trace_product(op, rho).re).collect()
    }
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> num_complex::Complex64 {
    let n = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
