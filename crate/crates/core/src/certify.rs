//! Classical-storage fidelity bounds, one-shot capacity lower bounds and
//! Schmidt-number certification.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::su_generators;
use crate::linalg::{self, c, ComplexMatrix, ComplexVector};
use crate::optim::{self, finite_difference_gradient, LbfgsOptions};
use crate::process::{choi_state, ProcessMatrix};
use crate::quantum::{matrix_entropy, DensityMatrix, PureState};
use crate::rng;
use crate::tomography::{rho_from_t, t_from_psd};

/// Poisson terms are summed until the next term, relative to the
/// non-vacuum weight, is below this.
pub const POISSON_TAIL: f64 = 1e-18;
/// Largest dimension accepted by [`q1_lower_bound`].
pub const Q1_MAX_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d: usize,
    pub mu: f64,
    pub eta_m: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::param("d", "must be at least 2"));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::param("mu", "must be positive"));
        }
        if !(self.eta_m > 0.0 && self.eta_m <= 1.0) {
            return Err(Error::param("eta_m", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBound {
    pub fidelity: f64,
    pub n_min: usize,
    /// Weight kept from the `N_min` photon-number term.
    pub gamma: f64,
}

/// `P(μ, N)` for N = 0.. until the tail beyond the last term is negligible,
/// with tails `Σ_{N>i} P(N)` summed from the top down.
fn poisson_terms(mu: f64) -> (Vec<f64>, Vec<f64>) {
    let nonvacuum = -(-mu).exp_m1();
    let mut p = vec![(-mu).exp()];
    let mut n = 0usize;
    while ((n as f64) < mu || p[n] > POISSON_TAIL * nonvacuum) && n < 10_000 {
        n += 1;
        p.push(p[n - 1] * mu / n as f64);
    }
    let mut tails = vec![0.0; p.len()];
    for i in (0..p.len() - 1).rev() {
        tails[i] = tails[i + 1] + p[i + 1];
    }
    (p, tails)
}

fn photon_fidelity(n: usize, d: usize) -> f64 {
    (n as f64 + 1.0) / (n as f64 + d as f64)
}

/// Best measure-and-prepare fidelity for weak coherent inputs stored with
/// efficiency `η_M`: the attacker keeps only the highest photon-number
/// components whose weight matches the memory's success probability.
pub fn classical_bound(p: &BoundParams) -> Result<ClassicalBound> {
    p.validate()?;
    let (terms, tails) = poisson_terms(p.mu);
    let nonvacuum = -(-p.mu).exp_m1();
    let budget = nonvacuum * p.eta_m;
    let n_min = (0..tails.len())
        .find(|&i| tails[i] <= budget)
        .ok_or_else(|| Error::param("mu", "Poisson series did not converge"))?;
    let gamma = (budget - tails[n_min]).max(0.0);
    debug_assert!(gamma >= 0.0 && gamma <= terms[n_min] * (1.0 + 1e-9) + 1e-15);
    let mut num = photon_fidelity(n_min, p.d) * gamma;
    let mut den = gamma;
    for (n, &t) in terms.iter().enumerate().skip(n_min + 1) {
        num += photon_fidelity(n, p.d) * t;
        den += t;
    }
    Ok(ClassicalBound { fidelity: num / den, n_min, gamma })
}

/// Unit-efficiency limit: the photon-number average of `(N+1)/(N+d)`
/// conditioned on at least one photon.
pub fn classical_bound_unit_efficiency(d: usize, mu: f64) -> Result<f64> {
    BoundParams { d, mu, eta_m: 1.0 }.validate()?;
    let (terms, _) = poisson_terms(mu);
    let nonvacuum = -(-mu).exp_m1();
    Ok(terms.iter().enumerate().skip(1).map(|(n, p)| photon_fidelity(n, d) * p).sum::<f64>() / nonvacuum)
}

/// `(η_M, bound)` pairs over `etas`.
pub fn bound_curve(d: usize, mu: f64, etas: &[f64]) -> Result<Vec<(f64, ClassicalBound)>> {
    etas.iter().map(|&eta_m| Ok((eta_m, classical_bound(&BoundParams { d, mu, eta_m })?))).collect()
}

/// Channel applied to half of the purification `Σ|i⟩⊗√ρ|i⟩`, reference first:
/// `d·(√ρᵀ ⊗ I) J (√ρᵀ ⊗ I)` with `J` the Choi state.
fn joint_state(choi: &ComplexMatrix, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    let d = rho.dim();
    let b = linalg::sqrt_psd(rho.matrix())?.transpose();
    let left = linalg::kron(&b, &ComplexMatrix::identity(d, d));
    Ok(&left * choi * &left * c(d as f64, 0.0))
}

fn trace_reference(joint: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        out += joint.view((i * d, i * d), (d, d));
    }
    out
}

fn coherent_information_from_choi(choi: &ComplexMatrix, rho: &DensityMatrix) -> Result<f64> {
    let joint = joint_state(choi, rho)?;
    let out = trace_reference(&joint, rho.dim());
    Ok(matrix_entropy(&out)? - matrix_entropy(&joint)?)
}

/// `S(E(ρ)) − S((I⊗E)(|Ψ_ρ⟩⟨Ψ_ρ|))` in bits; may be negative.
pub fn coherent_information(chi: &ProcessMatrix, rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != chi.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), got: rho.dim() });
    }
    let basis = su_generators(chi.dim())?;
    let choi = choi_state(chi, &basis)?;
    coherent_information_from_choi(choi.matrix(), rho)
}

#[derive(Debug, Clone)]
pub struct Q1Result {
    /// Capacity lower bound, clamped at 0.
    pub q1: f64,
    /// Best coherent information found (unclamped).
    pub raw: f64,
    pub rho: DensityMatrix,
    pub converged: bool,
}

/// Maximizes coherent information over input states.
pub fn q1_lower_bound(chi: &ProcessMatrix, restarts: usize, seed: u64) -> Result<Q1Result> {
    let d = chi.dim();
    if d > Q1_MAX_DIM {
        return Err(Error::param("d", format!("at most {Q1_MAX_DIM} for coherent-information search")));
    }
    let basis = su_generators(d)?;
    let choi = choi_state(chi, &basis)?.into_matrix();
    let value = |t: &[f64]| -> f64 {
        rho_from_t(t, d).and_then(|rho| coherent_information_from_choi(&choi, &rho)).map(|v| -v).unwrap_or(f64::NAN)
    };
    let opts = LbfgsOptions { gradient_tolerance: 1e-7, max_iterations: 500, ..Default::default() };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for r in 0..restarts.max(1) {
        let x0 = if r == 0 {
            t_from_psd(&ComplexMatrix::identity(d, d).unscale(d as f64))?
        } else {
            let mut g = rng::substream(seed, &format!("q1/restart-{r}"));
            (0..d * d).map(|_| g.sample::<f64, _>(StandardNormal)).collect()
        };
        let res = optim::minimize(
            |t, grad| {
                let fd = finite_difference_gradient(value, t, 1e-7);
                grad.copy_from_slice(&fd);
                value(t)
            },
            &x0,
            &opts,
        );
        if res.value.is_finite() && best.as_ref().is_none_or(|b| res.value < b.0) {
            best = Some((res.value, res.x.clone(), res.converged()));
        }
    }
    let (neg, t, converged) = best.ok_or_else(|| Error::Optimizer("coherent-information search diverged".into()))?;
    let raw = -neg;
    Ok(Q1Result { q1: raw.max(0.0), raw, rho: rho_from_t(&t, d)?, converged })
}

#[derive(Debug, Clone)]
pub struct C1Result {
    /// Mutual information in bits.
    pub c1: f64,
    pub probabilities: Vec<f64>,
    pub states: Vec<PureState>,
    pub povm: Vec<ComplexMatrix>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1Options {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for C1Options {
    fn default() -> Self {
        C1Options { max_iterations: 300, tolerance: 1e-11 }
    }
}

/// `Q(y|x) = Tr(P_y σ_x)` clamped to [0, 1].
fn transition(povm: &[ComplexMatrix], outputs: &[ComplexMatrix]) -> Vec<Vec<f64>> {
    outputs
        .iter()
        .map(|s| povm.iter().map(|p| crate::generators::trace_product(p, s).re.clamp(0.0, 1.0)).collect())
        .collect()
}

fn mutual_information(p: &[f64], q: &[Vec<f64>]) -> f64 {
    let m = q.first().map_or(0, |r| r.len());
    let marginal: Vec<f64> = (0..m).map(|y| p.iter().zip(q).map(|(px, row)| px * row[y]).sum()).collect();
    let mut total = 0.0;
    for (px, row) in p.iter().zip(q) {
        for (qy, &qyx) in marginal.iter().zip(row) {
            if *px > 0.0 && qyx > 0.0 && *qy > 0.0 {
                total += px * qyx * (qyx / qy).log2();
            }
        }
    }
    total.max(0.0)
}

/// `log₂(Q(y|x)/q(y))`, floored so that impossible outcomes stay finite.
fn log_ratio(p: &[f64], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = q.first().map_or(0, |r| r.len());
    let marginal: Vec<f64> = (0..m).map(|y| p.iter().zip(q).map(|(px, row)| px * row[y]).sum()).collect();
    q.iter()
        .map(|row| {
            row.iter()
                .zip(&marginal)
                .map(|(&a, &b)| if b > 0.0 { (a.max(1e-300) / b).log2().max(-60.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Blahut-Arimoto for the input distribution of a classical channel.
fn blahut_arimoto(q: &[Vec<f64>], mut p: Vec<f64>, iterations: usize) -> Vec<f64> {
    for _ in 0..iterations {
        let lr = log_ratio(&p, q);
        let weights: Vec<f64> = p
            .iter()
            .zip(q.iter().zip(&lr))
            .map(|(px, (row, l))| px * row.iter().zip(l).map(|(a, b)| a * b).sum::<f64>().exp2())
            .collect();
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            break;
        }
        let next: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let change: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if change < 1e-14 {
            break;
        }
    }
    p
}

/// Pseudo-inverse square root of a PSD matrix.
fn inv_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = linalg::eigh(m)?;
    let top = e.values.iter().cloned().fold(0.0, f64::max);
    Ok(e.map(|v| if v > 1e-12 * top.max(1e-300) { 1.0 / v.sqrt() } else { 0.0 }))
}

/// Square-root measurement for `p_x σ_x`, completed with the projector on the
/// unsupported subspace when the ensemble is not full rank.
fn pretty_good_measurement(p: &[f64], outputs: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let d = outputs[0].nrows();
    let mut avg = ComplexMatrix::zeros(d, d);
    for (px, s) in p.iter().zip(outputs) {
        avg += s * c(*px, 0.0);
    }
    let w = inv_sqrt(&avg)?;
    let mut povm: Vec<ComplexMatrix> = p.iter().zip(outputs).map(|(px, s)| &w * s * &w * c(*px, 0.0)).collect();
    let covered: ComplexMatrix = povm.iter().fold(ComplexMatrix::zeros(d, d), |a, b| a + b);
    let rest = ComplexMatrix::identity(d, d) - covered;
    if linalg::trace_norm(&rest) > 1e-9 {
        povm.push(rest);
    }
    Ok(povm)
}

fn top_eigenvector(m: &ComplexMatrix) -> Result<ComplexVector> {
    let e = linalg::eigh(m)?;
    Ok(e.vectors.column(m.nrows() - 1).into_owned())
}

struct Ensemble<'a> {
    chi: &'a ProcessMatrix,
    basis: &'a crate::generators::GeneratorBasis,
    p: Vec<f64>,
    states: Vec<ComplexVector>,
    outputs: Vec<ComplexMatrix>,
    povm: Vec<ComplexMatrix>,
}

impl Ensemble<'_> {
    fn output(&self, v: &ComplexVector) -> ComplexMatrix {
        self.chi.apply_to(self.basis, &linalg::outer(v))
    }

    fn q(&self) -> Vec<Vec<f64>> {
        transition(&self.povm, &self.outputs)
    }

    fn information(&self) -> f64 {
        mutual_information(&self.p, &self.q())
    }

    fn update_states(&mut self) -> Result<()> {
        let adjoints: Vec<ComplexMatrix> =
            self.povm.iter().map(|py| self.chi.apply_adjoint_to(self.basis, py)).collect();
        for x in 0..self.states.len() {
            let before = self.information();
            let lr = log_ratio(&self.p, &self.q());
            let d = self.states[x].len();
            let mut w = ComplexMatrix::zeros(d, d);
            for (l, a) in lr[x].iter().zip(&adjoints) {
                w += a * c(*l, 0.0);
            }
            let w = (&w + w.adjoint()).scale(0.5);
            let candidate = top_eigenvector(&w)?;
            let candidate_out = self.output(&candidate);
            let old = std::mem::replace(&mut self.states[x], candidate);
            let old_out = std::mem::replace(&mut self.outputs[x], candidate_out);
            if self.information() < before {
                self.states[x] = old;
                self.outputs[x] = old_out;
            }
        }
        Ok(())
    }

    fn update_povm(&mut self) -> Result<()> {
        let d = self.states[0].len();
        let mut eps = 1.0;
        let mut current = self.information();
        for _ in 0..20 {
            let lr = log_ratio(&self.p, &self.q());
            let grads: Vec<ComplexMatrix> = (0..self.povm.len())
                .map(|y| {
                    let mut g = ComplexMatrix::zeros(d, d);
                    for ((out, px), row) in self.outputs.iter().zip(&self.p).zip(&lr) {
                        g += out * c(px * row[y], 0.0);
                    }
                    g
                })
                .collect();
            let mut accepted = false;
            while eps > 1e-8 {
                let grown: Vec<ComplexMatrix> = self
                    .povm
                    .iter()
                    .zip(&grads)
                    .map(|(py, g)| {
                        let k = ComplexMatrix::identity(d, d) + g * c(eps, 0.0);
                        &k * py * k.adjoint()
                    })
                    .collect();
                let s = grown.iter().fold(ComplexMatrix::zeros(d, d), |a, b| a + b);
                let w = inv_sqrt(&s)?;
                let candidate: Vec<ComplexMatrix> = grown
                    .iter()
                    .map(|g| {
                        let m = &w * g * &w;
                        (&m + m.adjoint()).scale(0.5)
                    })
                    .collect();
                let value = mutual_information(&self.p, &transition(&candidate, &self.outputs));
                if value > current {
                    self.povm = candidate;
                    current = value;
                    accepted = true;
                    break;
                }
                eps *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(())
    }
}

/// Accessible-information lower bound on the classical capacity, in bits,
/// from `k` pure input states.
pub fn c1_lower_bound(chi: &ProcessMatrix, k: usize, restarts: usize, seed: u64) -> Result<C1Result> {
    c1_lower_bound_with(chi, k, restarts, seed, &C1Options::default())
}

pub fn c1_lower_bound_with(
    chi: &ProcessMatrix,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &C1Options,
) -> Result<C1Result> {
    let d = chi.dim();
    if k < d {
        return Err(Error::param("k", format!("ensemble size must be at least d = {d}")));
    }
    let basis = su_generators(d)?;
    chi.ensure_trace_preserving(&basis)?;
    let mut best: Option<C1Result> = None;
    for r in 0..restarts.max(1) {
        let mut g = rng::substream(seed, &format!("c1/restart-{r}"));
        let states: Vec<ComplexVector> = (0..k)
            .map(|x| {
                if r == 0 && x < d {
                    PureState::basis(d, x).amplitudes().clone()
                } else {
                    let v = ComplexVector::from_fn(d, |_, _| c(g.sample(StandardNormal), g.sample(StandardNormal)));
                    let n = v.norm();
                    v.unscale(n)
                }
            })
            .collect();
        let mut ens =
            Ensemble { chi, basis: &basis, p: vec![1.0 / k as f64; k], outputs: Vec::new(), povm: Vec::new(), states };
        ens.outputs = ens.states.iter().map(|v| ens.output(v)).collect();
        ens.povm = pretty_good_measurement(&ens.p, &ens.outputs)?;
        let mut value = ens.information();
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..opts.max_iterations {
            iterations = it + 1;
            ens.p = blahut_arimoto(&ens.q(), ens.p.clone(), 500);
            ens.update_states()?;
            ens.update_povm()?;
            let next = ens.information();
            if !next.is_finite() {
                return Err(Error::Optimizer(format!("mutual information diverged at iteration {iterations}")));
            }
            let gain = next - value;
            value = next.max(value);
            if gain.abs() < opts.tolerance {
                converged = true;
                break;
            }
        }
        let result = C1Result {
            c1: value.min((d as f64).log2()),
            probabilities: ens.p.clone(),
            states: ens.states.iter().map(|v| PureState::normalized(v.clone())).collect::<Result<_>>()?,
            povm: ens.povm.clone(),
            iterations,
            converged,
        };
        if best.as_ref().is_none_or(|b| result.c1 > b.c1) {
            best = Some(result);
        }
    }
    best.ok_or_else(|| Error::Optimizer("no restart produced a value".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtCertificate {
    /// Fidelity of the stored maximally entangled state with the ideal one.
    pub fidelity: f64,
    /// Largest k with fidelity > (k−1)/d.
    pub schmidt_number: usize,
}

pub fn schmidt_certificate(chi: &ProcessMatrix) -> Result<SchmidtCertificate> {
    let d = chi.dim();
    let basis = su_generators(d)?;
    let choi = choi_state(chi, &basis)?;
    let mut phi = ComplexVector::zeros(d * d);
    for i in 0..d {
        phi[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
    }
    let fidelity = choi.expectation(&phi).clamp(0.0, 1.0);
    Ok(SchmidtCertificate { fidelity, schmidt_number: schmidt_number(fidelity, d) })
}

/// Threshold ladder `F > (k−1)/d`.
pub fn schmidt_number(fidelity: f64, d: usize) -> usize {
    (1..=d).rev().find(|&k| fidelity > (k as f64 - 1.0) / d as f64).unwrap_or(1)
}
