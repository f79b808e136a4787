//! Maximum-likelihood state (QST) and process (QPT) tomography.
//!
//! Both reconstructions parameterize a PSD matrix as `T†T` with `T` upper
//! triangular. The parameter vector `t` holds the real diagonal of `T`
//! first, then the real and imaginary parts of the strictly upper entries in
//! row-major order, for `d²` reals in total (`d⁴` for a process).
//!
//! The count scale (N for states, C for processes) is profiled out in closed
//! form, and the objectives are divided by the total count so that tolerances
//! do not depend on the number of trials.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::counts::{sample_counts, CountRecord, DetectorConfig, TimeBin};
use crate::error::{Error, Result};
use crate::generators::{su_generators, GeneratorBasis};
use crate::linalg::{self, c, ComplexMatrix, ComplexVector, C64};
use crate::optim::{self, LbfgsOptions, OptimResult};
use crate::process::ProcessMatrix;
use crate::quantum::{DensityMatrix, PureState};
use crate::rng;

/// Predicted probabilities below this are floored in the likelihood.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Relative objective difference under which two restarts count as tied.
const TIE_TOL: f64 = 1e-12;

/// Projective settings `|ψᵢ⟩⟨ψᵢ|`, exactly d² of them and informationally
/// complete.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    dim: usize,
    settings: Vec<PureState>,
    labels: Vec<String>,
}

impl MeasurementSet {
    pub fn new(dim: usize, settings: Vec<PureState>, labels: Vec<String>) -> Result<Self> {
        if settings.len() != dim * dim || labels.len() != settings.len() {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: settings.len() });
        }
        if let Some(bad) = settings.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        let set = MeasurementSet { dim, settings, labels };
        let basis = su_generators(dim)?;
        let rank = linalg::real_rank(&set.design_matrix(&basis), 1e-10);
        if rank < dim * dim {
            return Err(Error::RankDeficient { rank, required: dim * dim });
        }
        Ok(set)
    }

    /// `|n⟩`, then `(|n⟩+|m⟩)/√2` and `(|n⟩+i|m⟩)/√2` for n < m.
    pub fn standard(dim: usize) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut settings = Vec::with_capacity(dim * dim);
        let mut labels = Vec::with_capacity(dim * dim);
        for n in 0..dim {
            settings.push(PureState::basis(dim, n));
            labels.push(format!("C{n}"));
        }
        for (phase, tag) in [(c(s, 0.0), "+"), (c(0.0, s), "+i")] {
            for n in 0..dim {
                for m in n + 1..dim {
                    let mut v = ComplexVector::zeros(dim);
                    v[n] = c(s, 0.0);
                    v[m] = phase;
                    settings.push(PureState::new(v)?);
                    labels.push(format!("C{n}{tag}C{m}"));
                }
            }
        }
        Self::new(dim, settings, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    pub fn settings(&self) -> &[PureState] {
        &self.settings
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Real matrix `Bᵢⱼ = ⟨ψᵢ|λⱼ|ψᵢ⟩`.
    pub fn design_matrix(&self, basis: &GeneratorBasis) -> DMatrix<f64> {
        DMatrix::from_fn(self.settings.len(), basis.len(), |i, j| {
            let v = self.settings[i].amplitudes();
            (v.adjoint() * basis.operator(j) * v)[(0, 0)].re
        })
    }

    /// `⟨ψᵢ|ρ|ψᵢ⟩` for every setting.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.settings.iter().map(|s| rho.expectation(s.amplitudes())).collect()
    }
}

fn upper_len(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Upper-triangular `T` from `t`.
pub fn upper_factor(t: &[f64], d: usize) -> Result<ComplexMatrix> {
    if t.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, got: t.len() });
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t parameters"));
    }
    let mut m = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        m[(k, k)] = c(t[k], 0.0);
    }
    let mut q = d;
    for a in 0..d {
        for b in a + 1..d {
            m[(a, b)] = c(t[q], t[q + 1]);
            q += 2;
        }
    }
    Ok(m)
}

/// Inverse of [`upper_factor`]; the diagonal is made real by absorbing
/// row phases, which leaves `T†T` unchanged.
pub fn t_from_upper(upper: &ComplexMatrix) -> Vec<f64> {
    let d = upper.nrows();
    let mut t = vec![0.0; d * d];
    let mut fixed = upper.clone();
    for k in 0..d {
        let z = fixed[(k, k)];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            for j in 0..d {
                fixed[(k, j)] *= phase;
            }
        }
        t[k] = fixed[(k, k)].re;
    }
    let mut q = d;
    for a in 0..d {
        for b in a + 1..d {
            t[q] = fixed[(a, b)].re;
            t[q + 1] = fixed[(a, b)].im;
            q += 2;
        }
    }
    debug_assert_eq!(q, d + 2 * upper_len(d));
    t
}

/// Parameters whose `T†T` equals `m` (PSD). A tiny multiple of the identity
/// is added when `m` is singular.
pub fn t_from_psd(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let d = m.nrows();
    let scale = m.trace().re.abs().max(1e-300);
    for jitter in [0.0, 1e-12, 1e-9, 1e-6] {
        let shifted = m + ComplexMatrix::identity(d, d) * c(jitter * scale, 0.0);
        if let Some(ch) = shifted.cholesky() {
            return Ok(t_from_upper(&ch.l().adjoint()));
        }
    }
    Err(Error::NotPositive { min_eigenvalue: linalg::eigh(m)?.values[0] })
}

/// `ρ = T†T / Tr(T†T)`.
pub fn rho_from_t(t: &[f64], d: usize) -> Result<DensityMatrix> {
    let upper = upper_factor(t, d)?;
    let m = upper.adjoint() * &upper;
    let trace = m.trace().re;
    if !(trace > 0.0) {
        return Err(Error::param("t", "all-zero parameters have no normalization"));
    }
    DensityMatrix::from_unnormalized(m)
}

/// Gradient of `Tr(H·T†T)` with respect to `t` for Hermitian `H`.
fn factor_gradient(upper: &ComplexMatrix, h: &ComplexMatrix, grad: &mut [f64]) {
    let d = upper.nrows();
    let th = upper * h;
    for k in 0..d {
        grad[k] = 2.0 * th[(k, k)].re;
    }
    let mut q = d;
    for a in 0..d {
        for b in a + 1..d {
            grad[q] = 2.0 * th[(a, b)].re;
            grad[q + 1] = 2.0 * th[(a, b)].im;
            q += 2;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub restarts: usize,
    pub seed: u64,
    pub lbfgs: LbfgsOptions,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions { restarts: 5, seed: 0, lbfgs: LbfgsOptions::default() }
    }
}

/// Count-normalized state objective with N profiled out:
/// `L* = √(Σp · Σn²/p) − Σn`, divided by `Σn`.
#[derive(Debug, Clone)]
pub struct QstObjective {
    dim: usize,
    vectors: Vec<ComplexVector>,
    counts: Vec<f64>,
    total: f64,
}

impl QstObjective {
    pub fn new(counts: &[f64], meas: &MeasurementSet) -> Result<Self> {
        if counts.len() != meas.len() {
            return Err(Error::DimensionMismatch { expected: meas.len(), got: counts.len() });
        }
        if counts.iter().any(|&n| !(n.is_finite() && n >= 0.0)) {
            return Err(Error::param("counts", "must be finite and non-negative"));
        }
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param("counts", "no counts recorded"));
        }
        Ok(QstObjective {
            dim: meas.dim(),
            vectors: meas.settings().iter().map(|s| s.amplitudes().clone()).collect(),
            counts: counts.to_vec(),
            total,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Objective value; writes `∂/∂t` into `grad`.
    pub fn value_and_gradient(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim;
        let Ok(upper) = upper_factor(t, d) else { return f64::NAN };
        let m = upper.adjoint() * &upper;
        let s = m.trace().re;
        if !(s > 0.0) {
            return f64::NAN;
        }
        let raw: Vec<f64> = self.vectors.iter().map(|v| (v.adjoint() * &m * v)[(0, 0)].re / s).collect();
        let floored: Vec<f64> = raw.iter().map(|&p| p.max(PROBABILITY_FLOOR)).collect();
        let a: f64 = floored.iter().sum();
        let b: f64 = self.counts.iter().zip(&floored).map(|(n, p)| n * n / p).sum();
        let scale = (b / a).sqrt();
        let value = ((a * b).sqrt() - self.total) / self.total;

        let mut g = ComplexMatrix::zeros(d, d);
        let mut g_rho = 0.0;
        for ((v, &n), (&p, &pr)) in self.vectors.iter().zip(&self.counts).zip(floored.iter().zip(&raw)) {
            if pr < PROBABILITY_FLOOR {
                continue;
            }
            let w = (0.5 * scale - n * n / (2.0 * scale * p * p)) / self.total;
            g += v * v.adjoint() * c(w, 0.0);
            g_rho += w * p;
        }
        let h = (g - ComplexMatrix::identity(d, d) * c(g_rho, 0.0)).unscale(s);
        factor_gradient(&upper, &h, grad);
        value
    }

    /// The profiled count scale N at `t`.
    pub fn scale(&self, t: &[f64]) -> Result<f64> {
        let rho = rho_from_t(t, self.dim)?;
        let ps: Vec<f64> = self.vectors.iter().map(|v| rho.expectation(v).max(PROBABILITY_FLOOR)).collect();
        let a: f64 = ps.iter().sum();
        let b: f64 = self.counts.iter().zip(&ps).map(|(n, p)| n * n / p).sum();
        Ok((b / a).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct QstResult {
    pub rho: DensityMatrix,
    /// Final count-normalized objective.
    pub objective: f64,
    /// Fitted count scale N.
    pub scale: f64,
    pub t: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iteration of the winning restart.
    pub history: Vec<f64>,
}

/// Linear inversion: solves `n = N·Bc` with `Tr ρ = 1` fixing N. The result
/// is Hermitian and unit-trace but may have negative eigenvalues.
pub fn linear_inversion(counts: &[f64], meas: &MeasurementSet) -> Result<ComplexMatrix> {
    if counts.len() != meas.len() {
        return Err(Error::DimensionMismatch { expected: meas.len(), got: counts.len() });
    }
    let basis = su_generators(meas.dim())?;
    let design = meas.design_matrix(&basis);
    let y = nalgebra::DVector::from_column_slice(counts);
    let coeffs = design.svd(true, true).solve(&y, 1e-12).map_err(|e| Error::Optimizer(e.to_string()))?;
    let norm = coeffs[0] * meas.dim() as f64;
    if !(norm.abs() > 0.0) {
        return Err(Error::param("counts", "zero total signal"));
    }
    let cs: Vec<C64> = coeffs.iter().map(|&v| c(v / norm, 0.0)).collect();
    Ok(basis.reconstruct(&cs))
}

/// Clips negative eigenvalues and renormalizes.
pub fn project_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let h = (m + m.adjoint()).scale(0.5);
    let e = linalg::eigh(&h)?;
    let clipped = e.map(|v| v.max(0.0));
    let tr = clipped.trace().re;
    if !(tr > 0.0) {
        return Err(Error::NotPositive { min_eigenvalue: e.values[0] });
    }
    Ok(clipped.unscale(tr))
}

fn random_t<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn norm(t: &[f64]) -> f64 {
    t.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Restart 0 starts from `first`; the rest from seeded Gaussian points.
/// The lowest objective wins, ties going to the smaller parameter norm.
fn best_of_restarts<F>(
    mut f: F,
    first: Option<Vec<f64>>,
    n: usize,
    opts: &MleOptions,
    stream: &str,
) -> Result<OptimResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut best: Option<OptimResult> = None;
    let restarts = opts.restarts.max(1);
    for r in 0..restarts {
        let x0 = match (&first, r) {
            (Some(x), 0) => x.clone(),
            _ => random_t(n, &mut rng::substream(opts.seed, &format!("{stream}/restart-{r}"))),
        };
        let res = optim::minimize(&mut f, &x0, &opts.lbfgs);
        if !res.value.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                let tol = TIE_TOL * b.value.abs().max(1.0);
                res.value < b.value - tol || ((res.value - b.value).abs() <= tol && norm(&res.x) < norm(&b.x))
            }
        };
        if better {
            best = Some(res);
        }
    }
    best.ok_or_else(|| Error::Optimizer(format!("all {restarts} restarts diverged")))
}

/// Maximum-likelihood state from per-setting counts.
pub fn qst_mle(counts: &[f64], meas: &MeasurementSet, opts: &MleOptions) -> Result<QstResult> {
    let objective = QstObjective::new(counts, meas)?;
    let d = meas.dim();
    let start = linear_inversion(counts, meas)
        .and_then(|m| project_psd(&m))
        .map(|m| m * c(0.99, 0.0) + ComplexMatrix::identity(d, d) * c(0.01 / d as f64, 0.0))
        .and_then(|m| t_from_psd(&m))
        .ok();
    let res = best_of_restarts(|t, g| objective.value_and_gradient(t, g), start, d * d, opts, "qst")?;
    let rho = rho_from_t(&res.x, d)?;
    Ok(QstResult {
        scale: objective.scale(&res.x)?,
        rho,
        objective: res.value,
        gradient_norm: res.gradient_norm(),
        iterations: res.iterations,
        converged: res.converged(),
        history: res.history,
        t: res.x,
    })
}

/// Reconstruction from count records, one per setting, using bin totals.
pub fn qst_mle_records(records: &[CountRecord], meas: &MeasurementSet, opts: &MleOptions) -> Result<QstResult> {
    let counts: Vec<f64> = records.iter().map(|r| r.total() as f64).collect();
    qst_mle(&counts, meas, opts)
}

/// Count-normalized process objective: the profiled data term
/// `Σ(c − C·p)²/C` plus `w·‖Σ χ_mn λ_n λ_m − I‖²_F`.
#[derive(Debug, Clone)]
pub struct QptObjective {
    dim: usize,
    basis: GeneratorBasis,
    /// `vₘ = ⟨φᵢ|λₘ|ψⱼ⟩` for every (input, setting) pair; `p = v†χv`.
    vectors: Vec<ComplexVector>,
    counts: Vec<f64>,
    total: f64,
    weight: f64,
    products: Vec<ComplexMatrix>,
}

impl QptObjective {
    /// `penalty` is the absolute weight λ; `None` uses 10 × total counts.
    pub fn new(
        counts: &[Vec<f64>],
        inputs: &MeasurementSet,
        meas: &MeasurementSet,
        penalty: Option<f64>,
    ) -> Result<Self> {
        let d = meas.dim();
        if inputs.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: inputs.dim() });
        }
        if counts.len() != inputs.len() {
            return Err(Error::param("counts", format!("{} input rows for {} inputs", counts.len(), inputs.len())));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != meas.len()) {
            return Err(Error::DimensionMismatch { expected: meas.len(), got: row.len() });
        }
        let flat: Vec<f64> = counts.iter().flatten().copied().collect();
        if flat.iter().any(|&n| !(n.is_finite() && n >= 0.0)) {
            return Err(Error::param("counts", "must be finite and non-negative"));
        }
        let total: f64 = flat.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param("counts", "no counts recorded"));
        }
        let lambda = penalty.unwrap_or(10.0 * total);
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::param("penalty", "must be finite and non-negative"));
        }
        let basis = su_generators(d)?;
        let mut vectors = Vec::with_capacity(flat.len());
        for phi in inputs.settings() {
            for psi in meas.settings() {
                let v = ComplexVector::from_iterator(
                    basis.len(),
                    basis.operators().iter().map(|l| (phi.amplitudes().adjoint() * l * psi.amplitudes())[(0, 0)]),
                );
                vectors.push(v);
            }
        }
        let dd = basis.len();
        let mut products = Vec::with_capacity(dd * dd);
        for n in 0..dd {
            for m in 0..dd {
                products.push(basis.operator(n) * basis.operator(m));
            }
        }
        Ok(QptObjective { dim: d, basis, vectors, counts: flat, total, weight: lambda / total, products })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parameter_count(&self) -> usize {
        self.basis.len() * self.basis.len()
    }

    pub fn value_and_gradient(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        let dd = self.basis.len();
        let Ok(upper) = upper_factor(t, dd) else { return f64::NAN };
        let chi = upper.adjoint() * &upper;

        let ps: Vec<f64> = self.vectors.iter().map(|v| (v.adjoint() * &chi * v)[(0, 0)].re).collect();
        let sp: f64 = ps.iter().map(|p| p * p).sum();
        let sc: f64 = self.counts.iter().map(|n| n * n).sum();
        if !(sp > 0.0) {
            return f64::NAN;
        }
        let scale = (sc / sp).sqrt();
        let cross: f64 = self.counts.iter().zip(&ps).map(|(n, p)| n * p).sum();
        let data = (2.0 * (sc * sp).sqrt() - 2.0 * cross) / self.total;

        let mut g = ComplexMatrix::zeros(dd, dd);
        for ((v, &n), &p) in self.vectors.iter().zip(&self.counts).zip(&ps) {
            let w = 2.0 * (scale * p - n) / self.total;
            if w != 0.0 {
                g += v * v.adjoint() * c(w, 0.0);
            }
        }

        let d = self.dim;
        let mut residual = -ComplexMatrix::identity(d, d);
        for m in 0..dd {
            for n in 0..dd {
                let z = chi[(m, n)];
                if z.norm_sqr() != 0.0 {
                    residual += &self.products[n * dd + m] * z;
                }
            }
        }
        let penalty = self.weight * residual.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if self.weight > 0.0 {
            for n in 0..dd {
                for m in 0..dd {
                    g[(n, m)] +=
                        crate::generators::trace_product(&residual, &self.products[n * dd + m]) * (2.0 * self.weight);
                }
            }
        }
        factor_gradient(&upper, &g, grad);
        data + penalty
    }

    /// Unconstrained least-squares χ (Hermitian, possibly indefinite),
    /// rescaled so that `Tr Σ χ_mn λ_n λ_m = d`.
    pub fn linear_estimate(&self) -> Result<ComplexMatrix> {
        let dd = self.basis.len();
        let cols = dd * dd;
        // Real coordinates of a Hermitian χ: diagonal, then (re, im) of the upper triangle.
        let design = DMatrix::from_fn(self.vectors.len(), cols, |row, col| {
            let v = &self.vectors[row];
            if col < dd {
                return v[col].norm_sqr();
            }
            let (k, l, imag) = hermitian_coordinate(col - dd, dd);
            let z = v[k].conj() * v[l];
            if imag {
                -2.0 * z.im
            } else {
                2.0 * z.re
            }
        });
        let y = nalgebra::DVector::from_column_slice(&self.counts);
        let x = design.svd(true, true).solve(&y, 1e-12).map_err(|e| Error::Optimizer(e.to_string()))?;
        let mut chi = ComplexMatrix::zeros(dd, dd);
        for k in 0..dd {
            chi[(k, k)] = c(x[k], 0.0);
        }
        for q in 0..dd * (dd - 1) / 2 {
            let (k, l, _) = hermitian_coordinate(2 * q, dd);
            let z = c(x[dd + 2 * q], x[dd + 2 * q + 1]);
            chi[(k, l)] = z;
            chi[(l, k)] = z.conj();
        }
        let mut tp = 0.0;
        for m in 0..dd {
            for n in 0..dd {
                tp += (self.products[n * dd + m].trace() * chi[(m, n)]).re;
            }
        }
        if !(tp.abs() > 0.0) {
            return Err(Error::Optimizer("linear estimate has zero trace".into()));
        }
        Ok(chi.scale(self.dim as f64 / tp))
    }
}

/// Maps a flat index over (re, im) pairs of the strict upper triangle to
/// `(row, col, is_imaginary)`.
fn hermitian_coordinate(idx: usize, n: usize) -> (usize, usize, bool) {
    let pair = idx / 2;
    let mut count = 0;
    for k in 0..n {
        let row_len = n - k - 1;
        if pair < count + row_len {
            return (k, k + 1 + pair - count, idx % 2 == 1);
        }
        count += row_len;
    }
    unreachable!("index {idx} outside the upper triangle of {n}×{n}")
}

#[derive(Debug, Clone)]
pub struct QptResult {
    pub chi: ProcessMatrix,
    pub objective: f64,
    /// Fitted count scale C.
    pub scale: f64,
    pub tp_residual: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QptOptions {
    pub mle: MleOptions,
    /// Absolute penalty weight λ; `None` means 10 × total counts.
    pub penalty: Option<f64>,
}

/// Maximum-likelihood χ from counts `c[input][setting]`.
pub fn qpt_mle(
    counts: &[Vec<f64>],
    inputs: &MeasurementSet,
    meas: &MeasurementSet,
    opts: &QptOptions,
) -> Result<QptResult> {
    let objective = QptObjective::new(counts, inputs, meas, opts.penalty)?;
    let dd = objective.basis.len();
    let start = objective
        .linear_estimate()
        .and_then(|chi| {
            let tr = chi.trace().re;
            let psd = project_psd(&chi)?;
            Ok(psd * c(0.99 * tr, 0.0) + ComplexMatrix::identity(dd, dd) * c(0.01 * tr / dd as f64, 0.0))
        })
        .and_then(|m| t_from_psd(&m))
        .ok();
    let res = best_of_restarts(
        |t, g| objective.value_and_gradient(t, g),
        start,
        objective.parameter_count(),
        &opts.mle,
        "qpt",
    )?;
    if !res.value.is_finite() {
        return Err(Error::Optimizer(format!("objective diverged after {} iterations", res.iterations)));
    }
    let upper = upper_factor(&res.x, dd)?;
    let chi = ProcessMatrix::new(meas.dim(), upper.adjoint() * &upper)?;
    let ps: Vec<f64> = objective.vectors.iter().map(|v| (v.adjoint() * chi.chi() * v)[(0, 0)].re).collect();
    let scale = (objective.counts.iter().map(|n| n * n).sum::<f64>() / ps.iter().map(|p| p * p).sum::<f64>()).sqrt();
    Ok(QptResult {
        tp_residual: chi.tp_residual(&objective.basis),
        chi,
        objective: res.value,
        scale,
        gradient_norm: res.gradient_norm(),
        iterations: res.iterations,
        converged: res.converged(),
        history: res.history,
    })
}

/// How synthetic counts are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    pub trials: u64,
    pub mean_photon: f64,
    /// Overall detection efficiency applied to every setting.
    pub efficiency: f64,
    /// Poisson-sampled counts when true, expected counts otherwise.
    pub poisson: bool,
    #[serde(default)]
    pub detector: DetectorConfig,
}

impl CountModel {
    pub fn expected(scale: f64) -> Self {
        CountModel {
            trials: 1,
            mean_photon: scale,
            efficiency: 1.0,
            poisson: false,
            detector: DetectorConfig::default(),
        }
    }

    fn counts(&self, probabilities: &[f64], stream: &str, seed: u64) -> Result<Vec<f64>> {
        let ps: Vec<f64> = probabilities.iter().map(|p| (p * self.efficiency).clamp(0.0, 1.0)).collect();
        if !self.poisson {
            let per = self.trials as f64 * self.mean_photon;
            return Ok(ps
                .iter()
                .map(|p| per * (p + self.detector.dark_counts_per_bin / self.mean_photon.max(f64::MIN_POSITIVE)))
                .collect());
        }
        let mut out = Vec::with_capacity(ps.len());
        for (i, p) in ps.iter().enumerate() {
            let mut r = rng::substream(seed, &format!("{stream}/setting-{i}"));
            out.push(sample_counts(&[*p], self.trials, self.mean_photon, &self.detector, &mut r)?[0] as f64);
        }
        Ok(out)
    }
}

/// Imperfections applied to a state before it is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateNoise {
    /// Weight of the maximally mixed state.
    #[serde(default)]
    pub depolarizing: f64,
    /// Standard deviation (rad) of independent per-channel phase noise.
    #[serde(default)]
    pub phase_jitter: f64,
}

impl StateNoise {
    /// Averaged effect: off-diagonals shrink by `e^{−σ²}`, then mixing.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if !(0.0..=1.0).contains(&self.depolarizing) || !(self.phase_jitter >= 0.0) {
            return Err(Error::param("noise", "depolarizing in [0, 1] and phase_jitter ≥ 0"));
        }
        let d = rho.dim();
        let damp = (-self.phase_jitter * self.phase_jitter).exp();
        let mut m = rho.matrix().clone();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m[(i, j)] *= damp;
                }
            }
        }
        let mixed =
            m * c(1.0 - self.depolarizing, 0.0) + ComplexMatrix::identity(d, d) * c(self.depolarizing / d as f64, 0.0);
        DensityMatrix::from_unnormalized(mixed)
    }
}

/// Counts for every setting of `meas` on (noisy) `rho`.
pub fn synthetic_state_counts(
    rho: &DensityMatrix,
    meas: &MeasurementSet,
    model: &CountModel,
    noise: &StateNoise,
    seed: u64,
) -> Result<Vec<f64>> {
    let noisy = noise.apply(rho)?;
    model.counts(&meas.probabilities(&noisy), "qst", seed)
}

/// Same as [`synthetic_state_counts`], packaged as one record per setting.
pub fn synthetic_state_records(
    rho: &DensityMatrix,
    meas: &MeasurementSet,
    model: &CountModel,
    noise: &StateNoise,
    bin: TimeBin,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    let counts = synthetic_state_counts(rho, meas, model, noise, seed)?;
    meas.labels()
        .iter()
        .zip(counts)
        .map(|(label, n)| CountRecord::new(label.clone(), vec![bin], vec![n.round() as u64], model.trials, seed))
        .collect()
}

/// Counts `c[input][setting]` for the channel `chi`.
pub fn synthetic_process_counts(
    chi: &ProcessMatrix,
    inputs: &MeasurementSet,
    meas: &MeasurementSet,
    model: &CountModel,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let basis = su_generators(chi.dim())?;
    inputs
        .settings()
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let out = crate::process::apply_channel_with(&basis, chi, &DensityMatrix::from_pure(phi))?;
            model.counts(&meas.probabilities(&out), &format!("qpt/input-{i}"), seed)
        })
        .collect()
}

/// `row,col,abs,phase` rows for bar-chart rendering.
pub fn element_csv(m: &ComplexMatrix) -> String {
    let mut out = String::from("row,col,abs,phase\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = writeln!(out, "{i},{j},{:e},{:e}", z.norm(), z.arg());
        }
    }
    out
}
