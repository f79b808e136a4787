//! Process (χ) matrices in the generator basis and the channel operations
//! built on them: `E(ρ) = Σ χ_mn λ_m ρ λ_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{su_generators, trace_product, GeneratorBasis};
use crate::linalg::{self, c, ComplexMatrix, MatrixJson, C64};
use crate::quantum::DensityMatrix;

/// Trace-preservation tolerance on `‖Σ χ_mn λ_n λ_m − I‖_F`.
pub const TP_TOL: f64 = 1e-6;
const CHI_HERMITIAN_TOL: f64 = 1e-8;
const CHI_PSD_TOL: f64 = 1e-8;

/// d²×d² Hermitian PSD matrix describing a map on d×d matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    dim: usize,
    chi: ComplexMatrix,
}

impl ProcessMatrix {
    /// Validates shape, Hermiticity and positivity. Trace preservation is a
    /// separate check ([`ProcessMatrix::tp_residual`]) because reconstructed
    /// estimates are only approximately trace preserving.
    pub fn new(dim: usize, chi: ComplexMatrix) -> Result<Self> {
        let n = dim * dim;
        if chi.nrows() != n || chi.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: chi.nrows() });
        }
        if !linalg::all_finite(&chi) {
            return Err(Error::NonFinite("process matrix"));
        }
        let deviation = linalg::hermitian_deviation(&chi);
        if deviation > CHI_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let chi = (&chi + chi.adjoint()).scale(0.5);
        let min_eigenvalue = linalg::eigh_unchecked(&chi).values[0];
        if min_eigenvalue < -CHI_PSD_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(ProcessMatrix { dim, chi })
    }

    /// Hilbert-space dimension d (χ itself is d²×d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chi(&self) -> &ComplexMatrix {
        &self.chi
    }

    /// `χ₀₀`: overlap with the identity process (process fidelity).
    pub fn identity_fidelity(&self) -> f64 {
        self.chi[(0, 0)].re
    }

    pub fn identity(d: usize) -> Result<Self> {
        let mut chi = ComplexMatrix::zeros(d * d, d * d);
        chi[(0, 0)] = c(1.0, 0.0);
        Self::new(d, chi)
    }

    /// `ρ ↦ (1 − p) ρ + p Tr(ρ) I/d`.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        check_probability("p", p)?;
        let n = d * d;
        let mut chi = ComplexMatrix::zeros(n, n);
        // Fully depolarizing map in the unnormalized generator basis:
        // χ₀₀ = 1/d², χᵢᵢ = 1/(2d).
        chi[(0, 0)] = c(1.0 - p + p / (n as f64), 0.0);
        for i in 1..n {
            chi[(i, i)] = c(p / (2.0 * d as f64), 0.0);
        }
        Self::new(d, chi)
    }

    /// `ρ ↦ (1 − p) ρ + p diag(ρ)`; for d = 2 this is a Z flip with
    /// probability `p/2`.
    pub fn dephasing(d: usize, p: f64) -> Result<Self> {
        check_probability("p", p)?;
        let mut kraus = vec![ComplexMatrix::identity(d, d).scale((1.0 - p).sqrt())];
        for k in 0..d {
            let mut proj = ComplexMatrix::zeros(d, d);
            proj[(k, k)] = c(p.sqrt(), 0.0);
            kraus.push(proj);
        }
        Self::from_kraus(d, &kraus)
    }

    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        Self::from_kraus(u.nrows(), std::slice::from_ref(u))
    }

    /// Measure-and-prepare channel realizing the classical transition matrix
    /// `transition[x][y] = P(y|x)` in the computational basis.
    pub fn classical(transition: &[Vec<f64>]) -> Result<Self> {
        let d = transition.len();
        let mut kraus = Vec::with_capacity(d * d);
        for (x, row) in transition.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::param("transition", format!("row {x} is not a distribution")));
            }
            for (y, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    let mut k = ComplexMatrix::zeros(d, d);
                    k[(y, x)] = c(p.sqrt(), 0.0);
                    kraus.push(k);
                }
            }
        }
        Self::from_kraus(d, &kraus)
    }

    /// χ from a Kraus decomposition `E(ρ) = Σ K ρ K†`.
    pub fn from_kraus(d: usize, kraus: &[ComplexMatrix]) -> Result<Self> {
        let basis = su_generators(d)?;
        let n = d * d;
        let mut chi = ComplexMatrix::zeros(n, n);
        for k in kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: k.nrows() });
            }
            let e: Vec<C64> = basis.decompose(k);
            for m in 0..n {
                for nn in 0..n {
                    chi[(m, nn)] += e[m] * e[nn].conj();
                }
            }
        }
        Self::new(d, chi)
    }

    /// Convex combination `Σ wᵢ Eᵢ`.
    pub fn mixture(parts: &[(f64, &ProcessMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::param("parts", "empty mixture"))?.1;
        let mut chi = ComplexMatrix::zeros(first.chi.nrows(), first.chi.ncols());
        for (w, p) in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch { expected: first.dim, got: p.dim });
            }
            chi += p.chi.scale(*w);
        }
        Self::new(first.dim, chi)
    }

    /// `Σ χ_mn λ_n λ_m`, equal to the identity for a trace-preserving map.
    pub fn tp_operator(&self, basis: &GeneratorBasis) -> ComplexMatrix {
        let n = self.dim * self.dim;
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for m in 0..n {
            for k in 0..n {
                let w = self.chi[(m, k)];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                acc += (basis.operator(k) * basis.operator(m)) * w;
            }
        }
        acc
    }

    pub fn tp_residual(&self, basis: &GeneratorBasis) -> f64 {
        linalg::frobenius(&(self.tp_operator(basis) - ComplexMatrix::identity(self.dim, self.dim)))
    }

    pub fn ensure_trace_preserving(&self, basis: &GeneratorBasis) -> Result<()> {
        let residual = self.tp_residual(basis);
        if residual > TP_TOL {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(())
    }

    /// Applies the map to an arbitrary (not necessarily Hermitian) operator.
    pub fn apply_to(&self, basis: &GeneratorBasis, x: &ComplexMatrix) -> ComplexMatrix {
        let n = self.dim * self.dim;
        let right: Vec<ComplexMatrix> = basis.operators().iter().map(|l| x * l).collect();
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for m in 0..n {
            let mut inner = ComplexMatrix::zeros(self.dim, self.dim);
            for (k, r) in right.iter().enumerate() {
                let w = self.chi[(m, k)];
                if w.norm_sqr() != 0.0 {
                    inner += r * w;
                }
            }
            out += basis.operator(m) * inner;
        }
        out
    }

    /// Heisenberg-picture map `E†(X) = Σ χ_mn λ_n X λ_m`.
    pub fn apply_adjoint_to(&self, basis: &GeneratorBasis, x: &ComplexMatrix) -> ComplexMatrix {
        let conj = ProcessMatrix { dim: self.dim, chi: self.chi.map(|z| z.conj()) };
        conj.apply_to(basis, x)
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(self.dim, &self.chi)
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        Self::new(json.dim, json.to_matrix()?)
    }
}

impl Serialize for ProcessMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProcessMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = MatrixJson::deserialize(d)?;
        ProcessMatrix::from_json(&json).map_err(serde::de::Error::custom)
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(name, format!("{p} not in [0, 1]")));
    }
    Ok(())
}

/// `E(ρ)`. The output is renormalized when its trace is within [`TP_TOL`] of
/// one; a larger deviation means χ is not a valid channel.
pub fn apply_channel(chi: &ProcessMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if chi.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), got: rho.dim() });
    }
    let basis = su_generators(chi.dim())?;
    apply_channel_with(&basis, chi, rho)
}

pub fn apply_channel_with(basis: &GeneratorBasis, chi: &ProcessMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let out = chi.apply_to(basis, rho.matrix());
    let trace = out.trace().re;
    if (trace - 1.0).abs() > TP_TOL {
        return Err(Error::NotTracePreserving { residual: (trace - 1.0).abs() });
    }
    DensityMatrix::from_unnormalized(out)
}

/// Choi state `(I ⊗ E)(|Φ⟩⟨Φ|)` with `|Φ⟩ = Σ|ii⟩/√d`, reference system first.
pub fn choi_state(chi: &ProcessMatrix, basis: &GeneratorBasis) -> Result<DensityMatrix> {
    if basis.dim() != chi.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), got: basis.dim() });
    }
    chi.ensure_trace_preserving(basis)?;
    let d = chi.dim();
    let mut joint = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut unit = ComplexMatrix::zeros(d, d);
            unit[(i, j)] = c(1.0, 0.0);
            let block = chi.apply_to(basis, &unit);
            joint.view_mut((i * d, j * d), (d, d)).copy_from(&block.unscale(d as f64));
        }
    }
    DensityMatrix::from_unnormalized(joint)
}

/// Components `Tr(λ_k Σ χ_mn λ_n λ_m)`; `[d, 0, 0, ..]` for a trace-preserving map.
pub fn tp_components(chi: &ProcessMatrix, basis: &GeneratorBasis) -> Vec<f64> {
    let op = chi.tp_operator(basis);
    basis.operators().iter().map(|l| trace_product(l, &op).re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use crate::quantum::PureState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kraus_apply(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
        kraus.iter().fold(ComplexMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + k * rho * k.adjoint())
    }

    #[test]
    fn identity_choi_is_bell_state() {
        let basis = su_generators(2).unwrap();
        let choi = choi_state(&ProcessMatrix::identity(2).unwrap(), &basis).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::from_slice(&[c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]).unwrap();
        assert!(frobenius(&(choi.matrix() - bell.projector())) < 1e-12);
    }

    #[test]
    fn fully_depolarizing_choi_is_maximally_mixed() {
        let basis = su_generators(2).unwrap();
        let chi = ProcessMatrix::depolarizing(2, 1.0).unwrap();
        let choi = choi_state(&chi, &basis).unwrap();
        // Oracle: apply the map block by block through its Kraus form
        // {I, X, Y, Z}/2 and sum (1/2) Σ |i⟩⟨j| ⊗ E(|i⟩⟨j|).
        let kraus: Vec<ComplexMatrix> = basis.operators().iter().map(|p| p.scale(0.5)).collect();
        let mut oracle = ComplexMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut unit = ComplexMatrix::zeros(2, 2);
                unit[(i, j)] = c(1.0, 0.0);
                oracle.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&kraus_apply(&kraus, &unit).scale(0.5));
            }
        }
        assert!(frobenius(&(choi.matrix() - &oracle)) < 1e-12);
        assert!(frobenius(&(oracle - ComplexMatrix::identity(4, 4).scale(0.25))) < 1e-12);
    }

    #[test]
    fn identity_choi_d4_is_rank_one() {
        let basis = su_generators(4).unwrap();
        let choi = choi_state(&ProcessMatrix::identity(4).unwrap(), &basis).unwrap();
        let ev = choi.eigenvalues();
        assert!((ev[15] - 1.0).abs() < 1e-12);
        assert!(ev[..15].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn non_trace_preserving_is_flagged() {
        let basis = su_generators(2).unwrap();
        let mut chi = ComplexMatrix::zeros(4, 4);
        chi[(0, 0)] = c(0.5, 0.0);
        let p = ProcessMatrix::new(2, chi).unwrap();
        assert!(matches!(choi_state(&p, &basis), Err(Error::NotTracePreserving { .. })));
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(apply_channel(&p, &rho), Err(Error::NotTracePreserving { .. })));
    }

    #[test]
    fn chi_from_kraus_matches_kraus_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = linalg::random_unitary(3, &mut rng);
        let chi = ProcessMatrix::unitary(&u).unwrap();
        let basis = su_generators(3).unwrap();
        assert!(chi.tp_residual(&basis) < 1e-12);
        // Rank one, as any unitary channel.
        let ev = linalg::eigh(chi.chi()).unwrap().values;
        assert!(ev[..8].iter().all(|v| v.abs() < 1e-12));
        let psi = PureState::from_slice(&[c(0.3, 0.1), c(-0.5, 0.2), c(0.1, 0.7)]).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let out = apply_channel(&chi, &rho).unwrap();
        let expected = &u * rho.matrix() * u.adjoint();
        assert!(frobenius(&(out.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn apply_identity_and_depolarizing() {
        let rho = DensityMatrix::from_pure(&PureState::basis(2, 0));
        let id = apply_channel(&ProcessMatrix::identity(2).unwrap(), &rho).unwrap();
        assert!(frobenius(&(id.matrix() - rho.matrix())) < 1e-14);
        let dep = apply_channel(&ProcessMatrix::depolarizing(2, 1.0).unwrap(), &rho).unwrap();
        let pauli = su_generators(2).unwrap();
        let kraus: Vec<ComplexMatrix> = pauli.operators().iter().map(|p| p.scale(0.5)).collect();
        let oracle = kraus_apply(&kraus, rho.matrix());
        assert!(frobenius(&(dep.matrix() - oracle)) < 1e-14);
        assert!(frobenius(&(dep.matrix() - ComplexMatrix::identity(2, 2).scale(0.5))) < 1e-14);
    }

    #[test]
    fn depolarizing_closed_form_matches_kraus_sum() {
        for d in 2..=4 {
            let p = 0.3;
            let closed = ProcessMatrix::depolarizing(d, p).unwrap();
            let basis = su_generators(d).unwrap();
            // Kraus set {√(1-p) I} ∪ {√(p/d²) W_k} with W_0 = I, W_i = √(d/2) λ_i.
            let mut kraus = vec![ComplexMatrix::identity(d, d).scale((1.0 - p).sqrt())];
            for (k, op) in basis.operators().iter().enumerate() {
                let w = if k == 0 { 1.0 } else { (d as f64 / 2.0).sqrt() };
                kraus.push(op.scale(w * (p / (d * d) as f64).sqrt()));
            }
            let from_kraus = ProcessMatrix::from_kraus(d, &kraus).unwrap();
            assert!(frobenius(&(closed.chi() - from_kraus.chi())) < 1e-12);
            assert!((closed.identity_fidelity() - (1.0 - p + p / (d * d) as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn classical_channel_is_trace_preserving() {
        let chi = ProcessMatrix::classical(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let basis = su_generators(2).unwrap();
        assert!(chi.tp_residual(&basis) < 1e-12);
        let comps = tp_components(&chi, &basis);
        assert!((comps[0] - 2.0).abs() < 1e-12);
        assert!(comps[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn process_json_round_trip() {
        let chi = ProcessMatrix::depolarizing(3, 0.1).unwrap();
        let json = serde_json::to_string(&chi).unwrap();
        let back: ProcessMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, chi);
    }
}
