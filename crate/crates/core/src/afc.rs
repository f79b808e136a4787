//! Single-channel SMAFC physics: comb efficiency, Stark-controlled echo
//! suppression and recall, and the AFC time-bin analyzer.
//!
//! Time is measured from photon absorption. The engine works with echo
//! amplitudes; intensities and efficiencies are their squares.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing pulse edges against window edges.
const TIMING_EPS: f64 = 1e-9;

/// Stark coefficient of the Eu:YSO device, Hz per V/cm.
pub const DEVICE_STARK_COEFFICIENT: f64 = 28.0e3;
/// Field at the waveguide center for the 1.56 V operating bias, V/cm.
pub const DEVICE_FIELD: f64 = 176.8;
/// Inhomogeneity time fitted at the 4 V calibration bias.
pub const CALIBRATION_TAU_INH: f64 = 70.1e-9;
/// Bias voltages of the calibration and operating points.
pub const CALIBRATION_VOLTAGE: f64 = 4.0;
pub const OPERATING_VOLTAGE: f64 = 1.56;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombConfig {
    /// Tooth spacing Δ in Hz.
    pub delta: f64,
    pub finesse: f64,
    /// Peak absorption depth d of the teeth.
    pub peak_depth: f64,
    /// Effective tooth-width rate γ̃ in 1/s.
    pub gamma_tilde: f64,
}

impl CombConfig {
    pub fn new(delta: f64, finesse: f64, peak_depth: f64, gamma_tilde: f64) -> Result<Self> {
        let comb = CombConfig { delta, finesse, peak_depth, gamma_tilde };
        comb.validate()?;
        Ok(comb)
    }

    /// Fitted device comb (Δ = 2 MHz, F = 8.7, d = 10.6) with the given γ̃.
    pub fn device(gamma_tilde: f64) -> Self {
        CombConfig { delta: 2.0e6, finesse: 8.7, peak_depth: 10.6, gamma_tilde }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::param("delta", "must be positive"));
        }
        if !(self.finesse.is_finite() && self.finesse > 1.0) {
            return Err(Error::param("finesse", "must exceed 1"));
        }
        if !(self.peak_depth.is_finite() && self.peak_depth >= 0.0) {
            return Err(Error::param("peak_depth", "must be non-negative"));
        }
        if !(self.gamma_tilde.is_finite() && self.gamma_tilde >= 0.0) {
            return Err(Error::param("gamma_tilde", "must be non-negative"));
        }
        Ok(())
    }

    /// d̃ = (d/F)·√(π/(4 ln 2)).
    pub fn effective_depth(&self) -> f64 {
        self.peak_depth / self.finesse * (PI / (4.0 * 2f64.ln())).sqrt()
    }

    /// Echo time of order n.
    pub fn echo_time(&self, n: u32) -> f64 {
        n as f64 / self.delta
    }
}

/// γ̃ from a comb tooth FWHM γ (Hz).
pub fn gamma_tilde_from_fwhm(gamma: f64) -> f64 {
    2.0 * PI * gamma / (8.0 * 2f64.ln()).sqrt()
}

/// η(t) = d̃² e^{−d̃} e^{−t²γ̃²}. Even in t.
pub fn afc_efficiency(comb: &CombConfig, t: f64) -> f64 {
    let d = comb.effective_depth();
    d * d * (-d).exp() * (-(t * comb.gamma_tilde).powi(2)).exp()
}

/// γ̃ such that η(t1)/η(t2) equals `eta1/eta2` (requires t2 > t1 and
/// eta1 ≥ eta2). Independent of the comb depth.
pub fn fit_gamma_tilde(t1: f64, eta1: f64, t2: f64, eta2: f64) -> Result<f64> {
    if !(t2 > t1 && t1 >= 0.0) {
        return Err(Error::param("t", "need 0 ≤ t1 < t2"));
    }
    if !(eta1 > 0.0 && eta2 > 0.0 && eta1 >= eta2) {
        return Err(Error::param("eta", "need eta1 ≥ eta2 > 0"));
    }
    Ok(((eta1 / eta2).ln() / (t2 * t2 - t1 * t1)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkPulse {
    pub start: f64,
    pub duration: f64,
    /// +1 or −1.
    pub polarity: i8,
}

impl StarkPulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarkControl {
    /// μ_S in Hz per V/cm.
    pub stark_coefficient: f64,
    /// Field at the waveguide center, V/cm.
    pub field: f64,
    /// Amplitude decay time from field inhomogeneity, s.
    pub tau_inh: f64,
    #[serde(default)]
    pub pulses: Vec<StarkPulse>,
}

impl StarkControl {
    pub fn new(stark_coefficient: f64, field: f64, tau_inh: f64, pulses: Vec<StarkPulse>) -> Result<Self> {
        let ctrl = StarkControl { stark_coefficient, field, tau_inh, pulses };
        ctrl.validate()?;
        Ok(ctrl)
    }

    /// Device electrode at the 1.56 V operating bias. The inhomogeneity time
    /// is scaled from the 4 V calibration since the field spread is
    /// proportional to the field.
    pub fn device() -> Self {
        StarkControl {
            stark_coefficient: DEVICE_STARK_COEFFICIENT,
            field: DEVICE_FIELD,
            tau_inh: CALIBRATION_TAU_INH * CALIBRATION_VOLTAGE / OPERATING_VOLTAGE,
            pulses: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.field.is_finite() && self.field >= 0.0) {
            return Err(Error::param("field", "must be non-negative"));
        }
        if !self.stark_coefficient.is_finite() {
            return Err(Error::param("stark_coefficient", "must be finite"));
        }
        if !(self.tau_inh.is_finite() && self.tau_inh > 0.0) {
            return Err(Error::param("tau_inh", "must be positive"));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            if p.polarity != 1 && p.polarity != -1 {
                return Err(Error::PulseTiming(format!("pulse {i}: polarity must be ±1")));
            }
            if !(p.start.is_finite() && p.start >= 0.0 && p.duration.is_finite() && p.duration > 0.0) {
                return Err(Error::PulseTiming(format!("pulse {i}: bad start or duration")));
            }
        }
        for (i, w) in self.pulses.windows(2).enumerate() {
            if w[1].start < w[0].end() {
                return Err(Error::PulseTiming(format!("pulse {} starts before pulse {i} ends", i + 1)));
            }
        }
        Ok(())
    }

    /// Same electrode with the field scaled by `fraction`; the inhomogeneity
    /// time scales inversely.
    pub fn scaled(&self, fraction: f64) -> Self {
        StarkControl {
            stark_coefficient: self.stark_coefficient,
            field: self.field * fraction,
            tau_inh: self.tau_inh / fraction,
            pulses: Vec::new(),
        }
    }

    pub fn with_pulses(&self, pulses: Vec<StarkPulse>) -> Result<Self> {
        Self::new(self.stark_coefficient, self.field, self.tau_inh, pulses)
    }
}

/// Ω = μ_S·E.
pub fn stark_frequency(ctrl: &StarkControl) -> f64 {
    ctrl.stark_coefficient * ctrl.field
}

/// Signed echo amplitude after a Stark phase of duration τ:
/// `e^{−τ²/(2τ_inh²)}·cos(2πΩτ)`. Its square is the intensity law.
pub fn echo_amplitude_factor(ctrl: &StarkControl, tau: f64) -> f64 {
    (-(tau * tau) / (2.0 * ctrl.tau_inh * ctrl.tau_inh)).exp() * (2.0 * PI * stark_frequency(ctrl) * tau).cos()
}

/// T = 1/(4Ω).
pub fn suppression_pulse_duration(ctrl: &StarkControl) -> Result<f64> {
    let omega = stark_frequency(ctrl);
    if !(omega > 0.0) {
        return Err(Error::param("field", "zero Stark shift cannot suppress the echo"));
    }
    Ok(1.0 / (4.0 * omega))
}

/// Outcome of a pulse sequence on a stored photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Emission {
    /// No echo is released; `leakage` is the residual first-echo efficiency.
    Suppressed { leakage: f64 },
    /// Echo of order n at n/Δ.
    Echo { order: u32, time: f64, efficiency: f64, leakage: f64 },
}

impl Emission {
    pub fn is_suppressed(&self) -> bool {
        matches!(self, Emission::Suppressed { .. })
    }

    pub fn echo_time(&self) -> Option<f64> {
        match self {
            Emission::Echo { time, .. } => Some(*time),
            Emission::Suppressed { .. } => None,
        }
    }

    pub fn efficiency(&self) -> f64 {
        match self {
            Emission::Echo { efficiency, .. } => *efficiency,
            Emission::Suppressed { .. } => 0.0,
        }
    }
}

/// Recall window `[(n−1)/Δ, n/Δ]` containing `[start, end]`, if any.
pub fn recall_order(comb: &CombConfig, start: f64, end: f64) -> Option<u32> {
    let period = 1.0 / comb.delta;
    let tol = TIMING_EPS * period;
    let n = ((end - tol) / period).ceil().max(1.0);
    let lo = (n - 1.0) * period;
    let hi = n * period;
    (start >= lo - tol && end <= hi + tol).then_some(n as u32)
}

/// Applies the SMAFC window rules to `ctrl.pulses`.
///
/// No pulse: standard echo at 1/Δ. One pulse inside `[0, 1/Δ]`: suppressed.
/// A second, opposite-polarity pulse inside `[(n−1)/Δ, n/Δ]` with n ≥ 2
/// releases the echo at n/Δ. Durations other than 1/(4Ω) leave a residual
/// first echo, and unequal pulse areas reduce the recalled amplitude.
pub fn emission_time(comb: &CombConfig, ctrl: &StarkControl) -> Result<Emission> {
    comb.validate()?;
    ctrl.validate()?;
    let period = 1.0 / comb.delta;
    match ctrl.pulses.as_slice() {
        [] => Ok(Emission::Echo {
            order: 1,
            time: comb.echo_time(1),
            efficiency: afc_efficiency(comb, period),
            leakage: 0.0,
        }),
        [first, rest @ ..] => {
            if recall_order(comb, first.start, first.end()) != Some(1) {
                return Err(Error::PulseTiming(format!(
                    "suppression pulse [{:.4e}, {:.4e}] s outside [0, 1/Δ]",
                    first.start,
                    first.end()
                )));
            }
            let residual = echo_amplitude_factor(ctrl, first.duration);
            let leakage = afc_efficiency(comb, period) * residual * residual;
            match rest {
                [] => Ok(Emission::Suppressed { leakage }),
                [second] => {
                    if second.polarity == first.polarity {
                        return Err(Error::PulseTiming("recall pulse must have opposite polarity".into()));
                    }
                    if second.start < first.end() {
                        return Err(Error::PulseTiming("recall pulse precedes suppression pulse".into()));
                    }
                    let n = recall_order(comb, second.start, second.end()).ok_or_else(|| {
                        Error::PulseTiming(format!(
                            "recall pulse [{:.4e}, {:.4e}] s straddles a 1/Δ boundary",
                            second.start,
                            second.end()
                        ))
                    })?;
                    if n < 2 {
                        return Err(Error::PulseTiming("recall pulse inside the suppression window".into()));
                    }
                    let time = comb.echo_time(n);
                    let rephase = echo_amplitude_factor(ctrl, (first.duration - second.duration).abs());
                    Ok(Emission::Echo {
                        order: n,
                        time,
                        efficiency: afc_efficiency(comb, time) * rephase * rephase,
                        leakage,
                    })
                }
                _ => Err(Error::PulseTiming(format!(
                    "{} pulses given; at most a suppression and a recall pulse",
                    ctrl.pulses.len()
                ))),
            }
        }
    }
}

/// Pulse pair releasing echo order `n ≥ 2`, each pulse centered in its window.
pub fn pulses_for_order(comb: &CombConfig, ctrl: &StarkControl, n: u32, polarity: i8) -> Result<Vec<StarkPulse>> {
    if n < 2 {
        return Err(Error::param("n", "recall order must be at least 2"));
    }
    let width = suppression_pulse_duration(ctrl)?;
    let period = 1.0 / comb.delta;
    if width > period {
        return Err(Error::PulseTiming("suppression pulse longer than 1/Δ".into()));
    }
    let centered = |lo: f64| lo + 0.5 * (period - width);
    Ok(vec![
        StarkPulse { start: centered(0.0), duration: width, polarity },
        StarkPulse { start: centered((n - 1) as f64 * period), duration: width, polarity: -polarity },
    ])
}

/// Time-bin qubit α|e⟩ + β|l⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinState {
    pub alpha: Complex64,
    pub beta: Complex64,
    /// Early-late separation, s.
    pub bin_separation: f64,
}

impl TimeBinState {
    pub fn new(alpha: Complex64, beta: Complex64, bin_separation: f64) -> Result<Self> {
        let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { norm_sq });
        }
        if !(bin_separation > 0.0) {
            return Err(Error::param("bin_separation", "must be positive"));
        }
        Ok(TimeBinState { alpha, beta, bin_separation })
    }

    pub fn early(bin_separation: f64) -> Self {
        TimeBinState { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0), bin_separation }
    }

    pub fn late(bin_separation: f64) -> Self {
        TimeBinState { alpha: Complex64::new(0.0, 0.0), beta: Complex64::new(1.0, 0.0), bin_separation }
    }

    /// (|e⟩ + e^{iφ}|l⟩)/√2.
    pub fn equator(phase: f64, bin_separation: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        TimeBinState { alpha: Complex64::new(s, 0.0), beta: Complex64::from_polar(s, phase), bin_separation }
    }

    /// Relative phase arg(β) − arg(α).
    pub fn relative_phase(&self) -> f64 {
        self.beta.arg() - self.alpha.arg()
    }
}

/// AFC analyzer: transmits with probability p0, echoes after `storage_time`
/// with probability p1, with phase θ = 2π·detuning·storage_time on the echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub storage_time: f64,
    pub p0: f64,
    pub p1: f64,
    /// δ_f in Hz.
    pub detuning: f64,
}

impl AnalyzerConfig {
    /// Balanced analyzer at the given readout phase.
    pub fn balanced(storage_time: f64, theta: f64) -> Self {
        AnalyzerConfig { storage_time, p0: 0.3, p1: 0.3, detuning: theta / (2.0 * PI * storage_time) }
    }

    /// Besides p0, p1 ∈ [0, 1], a passive splitter cannot output more light
    /// than it receives for any input, which bounds the interference term:
    /// p0 + p1 + √(p0·p1) ≤ 1.
    pub fn validate(&self) -> Result<()> {
        if !(self.storage_time.is_finite() && self.storage_time > 0.0) {
            return Err(Error::param("storage_time", "must be positive"));
        }
        for (name, p) in [("p0", self.p0), ("p1", self.p1)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, "must lie in [0, 1]"));
            }
        }
        if self.p0 + self.p1 + (self.p0 * self.p1).sqrt() > 1.0 + 1e-12 {
            return Err(Error::param("p0, p1", "p0 + p1 + √(p0·p1) exceeds 1"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::param("detuning", "must be finite"));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        2.0 * PI * self.detuning * self.storage_time
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        AnalyzerConfig { detuning: theta / (2.0 * PI * self.storage_time), ..*self }
    }
}

/// Detection probabilities in the three output bins (early, middle, late).
/// The middle bin carries the interference `|α√p1·e^{iθ} + β√p0|²`.
pub fn analyzer_project(qubit: &TimeBinState, cfg: &AnalyzerConfig) -> Result<[f64; 3]> {
    cfg.validate()?;
    let sep = qubit.bin_separation;
    if (cfg.storage_time - sep).abs() > TIMING_EPS * sep {
        return Err(Error::PulseTiming(format!(
            "analyzer delay {:.4e} s does not match bin separation {:.4e} s",
            cfg.storage_time, sep
        )));
    }
    let (a, b) = (qubit.alpha, qubit.beta);
    let middle = a * cfg.p1.sqrt() * Complex64::from_polar(1.0, cfg.theta()) + b * cfg.p0.sqrt();
    Ok([a.norm_sqr() * cfg.p0, middle.norm_sqr(), b.norm_sqr() * cfg.p1])
}

/// (max − min)/(max + min); zero when both vanish.
pub fn visibility(max: f64, min: f64) -> f64 {
    if max + min <= 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

/// F = (V + 1)/2.
pub fn fidelity_from_visibility(v: f64) -> f64 {
    (v + 1.0) / 2.0
}

/// Signal/noise fidelity (S + N)/(S + 2N) of a basis state.
pub fn signal_noise_fidelity(signal: f64, noise: f64) -> f64 {
    if signal + noise <= 0.0 {
        return 0.0;
    }
    (signal + noise) / (signal + 2.0 * noise)
}

/// Sinusoidal fringe `y(θ) = A + B·cos(θ − φ)` fitted by linear least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fringe {
    pub offset: f64,
    pub amplitude: f64,
    /// Phase φ in (−π, π].
    pub phase: f64,
}

impl Fringe {
    pub fn visibility(&self) -> f64 {
        if self.offset <= 0.0 {
            0.0
        } else {
            (self.amplitude / self.offset).min(1.0)
        }
    }
}

pub fn fit_fringe(thetas: &[f64], values: &[f64]) -> Result<Fringe> {
    if thetas.len() != values.len() || thetas.len() < 3 {
        return Err(Error::param("fringe", "need at least three matching samples"));
    }
    let rows = thetas.len();
    let design = nalgebra::DMatrix::from_fn(rows, 3, |i, j| match j {
        0 => 1.0,
        1 => thetas[i].cos(),
        _ => thetas[i].sin(),
    });
    let y = nalgebra::DVector::from_column_slice(values);
    let sol = design.svd(true, true).solve(&y, 1e-12).map_err(|e| Error::param("fringe", e.to_string()))?;
    Ok(Fringe { offset: sol[0], amplitude: sol[1].hypot(sol[2]), phase: sol[2].atan2(sol[1]) })
}

/// Fraction of a Gaussian pulse (given FWHM) centered at `center` that falls
/// inside `[start, start + width]`.
pub fn gaussian_window_fraction(center: f64, fwhm: f64, start: f64, width: f64) -> f64 {
    let sigma = fwhm / (8.0 * 2f64.ln()).sqrt();
    let z = |t: f64| (t - center) / (sigma * std::f64::consts::SQRT_2);
    0.5 * (statrs::function::erf::erf(z(start + width)) - statrs::function::erf::erf(z(start)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctrl(omega_hz: f64, tau_inh: f64) -> StarkControl {
        StarkControl::new(1.0, omega_hz, tau_inh, Vec::new()).unwrap()
    }

    #[test]
    fn zero_depth_gives_zero_efficiency() {
        let comb = CombConfig::new(2e6, 8.7, 0.0, 1e5).unwrap();
        for t in [0.0, 1e-7, 1e-6] {
            assert_eq!(afc_efficiency(&comb, t), 0.0);
        }
    }

    #[test]
    fn device_comb_arithmetic() {
        let comb = CombConfig::device(0.0);
        let dt = 10.6 / 8.7 * (std::f64::consts::PI / (4.0 * 2f64.ln())).sqrt();
        assert!((comb.effective_depth() - dt).abs() < 1e-15);
        assert!((comb.effective_depth() - 1.297).abs() < 5e-4);
        assert!((afc_efficiency(&comb, 0.0) - 0.460).abs() < 5e-4);
    }

    #[test]
    fn efficiency_peaks_at_effective_depth_two() {
        let scan: Vec<(f64, f64)> = (1..4000)
            .map(|i| {
                let finesse = 1.0 + i as f64 * 0.005;
                let comb = CombConfig::new(2e6, finesse, 10.6, 0.0).unwrap();
                (comb.effective_depth(), afc_efficiency(&comb, 0.0))
            })
            .collect();
        let best = scan.iter().cloned().fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!((best.0 - 2.0).abs() < 5e-3);
        assert!((best.1 - 4.0 * (-2f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn efficiency_non_increasing_in_time() {
        let comb = CombConfig::device(3e5);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let eta = afc_efficiency(&comb, i as f64 * 1e-7);
            assert!(eta <= prev);
            prev = eta;
        }
    }

    #[test]
    fn gamma_fit_reproduces_ratio() {
        let g = fit_gamma_tilde(0.5e-6, 0.392, 1.0e-6, 0.313).unwrap();
        let comb = CombConfig::device(g);
        let ratio = afc_efficiency(&comb, 0.5e-6) / afc_efficiency(&comb, 1.0e-6);
        assert!((ratio - 0.392 / 0.313).abs() < 1e-12);
        assert!(fit_gamma_tilde(1e-6, 0.3, 0.5e-6, 0.4).is_err());
    }

    #[test]
    fn stark_frequencies() {
        let dev = StarkControl::device();
        assert!((stark_frequency(&dev) - 4.9504e6).abs() < 1.0);
        let four_volt = StarkControl { field: DEVICE_FIELD * 4.0 / 1.56, ..dev.clone() };
        assert!((stark_frequency(&four_volt) - 12.7e6).abs() < 0.01e6);
        let off = StarkControl { field: 0.0, ..dev };
        assert_eq!(stark_frequency(&off), 0.0);
        assert!(suppression_pulse_duration(&off).is_err());
    }

    #[test]
    fn suppression_durations() {
        let t = suppression_pulse_duration(&StarkControl::device()).unwrap();
        assert!((t - 1.0 / (4.0 * 28e3 * 176.8)).abs() < 1e-20);
        assert!((t - 50.5e-9).abs() < 0.1e-9);
        let t = suppression_pulse_duration(&ctrl(12.7e6, 70.1e-9)).unwrap();
        assert!((t - 19.685e-9).abs() < 0.01e-9);
        assert!(suppression_pulse_duration(&ctrl(1e15, 1e-9)).unwrap() < 1e-15);
    }

    #[test]
    fn echo_factor_zeros_and_envelope() {
        let c = ctrl(12.7e6, 70.1e-9);
        assert_eq!(echo_amplitude_factor(&c, 0.0), 1.0);
        let omega = 12.7e6;
        for k in 0..6 {
            let tau = k as f64 / (2.0 * omega);
            let intensity = echo_amplitude_factor(&c, tau).powi(2);
            assert!((intensity - (-(tau * tau) / (70.1e-9f64).powi(2)).exp()).abs() < 1e-12);
            let odd = (2 * k + 1) as f64 / (4.0 * omega);
            assert!(echo_amplitude_factor(&c, odd).powi(2) < 1e-20);
        }
        // First zero found by bisection on the sign change of the factor.
        let (mut lo, mut hi) = (0.0, 30e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if echo_amplitude_factor(&c, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 19.7e-9).abs() < 0.05e-9);
    }

    fn device_with(pulses: &[(f64, i8)]) -> StarkControl {
        let dev = StarkControl::device();
        let w = suppression_pulse_duration(&dev).unwrap();
        dev.with_pulses(pulses.iter().map(|&(start, polarity)| StarkPulse { start, duration: w, polarity }).collect())
            .unwrap()
    }

    #[test]
    fn emission_examples() {
        let comb = CombConfig::device(2e5);
        let e = emission_time(&comb, &StarkControl::device()).unwrap();
        assert_eq!(e.echo_time(), Some(0.5e-6));
        let e = emission_time(&comb, &device_with(&[(100e-9, 1)])).unwrap();
        assert!(e.is_suppressed());
        match e {
            Emission::Suppressed { leakage } => assert!(leakage < 1e-20),
            _ => unreachable!(),
        }
        let e = emission_time(&comb, &device_with(&[(100e-9, 1), (700e-9, -1)])).unwrap();
        match e {
            Emission::Echo { order, time, efficiency, .. } => {
                assert_eq!(order, 2);
                assert!((time - 1.0e-6).abs() < 1e-18);
                assert!((efficiency - afc_efficiency(&comb, 1.0e-6)).abs() < 1e-15);
            }
            _ => panic!("expected an echo"),
        }
        let slow = CombConfig::new(200e3, 8.7, 10.6, 0.0).unwrap();
        let pulses = pulses_for_order(&slow, &StarkControl::device(), 5, 1).unwrap();
        let e = emission_time(&slow, &StarkControl::device().with_pulses(pulses).unwrap()).unwrap();
        assert!((e.echo_time().unwrap() - 25e-6).abs() < 1e-15);
    }

    #[test]
    fn emission_timing_errors() {
        let comb = CombConfig::device(0.0);
        // Suppression pulse crossing 1/Δ = 500 ns.
        assert!(emission_time(&comb, &device_with(&[(480e-9, 1)])).is_err());
        // Same polarity.
        assert!(emission_time(&comb, &device_with(&[(100e-9, 1), (700e-9, 1)])).is_err());
        // Recall pulse straddling 1 µs.
        assert!(emission_time(&comb, &device_with(&[(100e-9, 1), (980e-9, -1)])).is_err());
        // Recall in the suppression window.
        assert!(emission_time(&comb, &device_with(&[(100e-9, 1), (300e-9, -1)])).is_err());
        // Out of order pulses fail validation.
        let dev = StarkControl::device();
        let w = suppression_pulse_duration(&dev).unwrap();
        let bad = vec![
            StarkPulse { start: 700e-9, duration: w, polarity: -1 },
            StarkPulse { start: 100e-9, duration: w, polarity: 1 },
        ];
        assert!(dev.with_pulses(bad).is_err());
    }

    #[test]
    fn echo_grid_for_all_orders() {
        let comb = CombConfig::new(200e3, 8.7, 10.6, 1e4).unwrap();
        let dev = StarkControl::device();
        for n in 2..=10 {
            let ctrl = dev.with_pulses(pulses_for_order(&comb, &dev, n, -1).unwrap()).unwrap();
            let e = emission_time(&comb, &ctrl).unwrap();
            assert_eq!(e.echo_time(), Some(n as f64 / 200e3));
        }
    }

    #[test]
    fn analyzer_interference() {
        let sep = 200e-9;
        let plus = TimeBinState::equator(0.0, sep);
        let cfg = AnalyzerConfig::balanced(sep, 0.0);
        let p = analyzer_project(&plus, &cfg).unwrap();
        assert!((p[1] - 2.0 * 0.3).abs() < 1e-15);
        let p = analyzer_project(&plus, &cfg.with_theta(PI)).unwrap();
        assert!(p[1] < 1e-15);

        let q1 = TimeBinState::equator(-PI / 2.0, sep);
        let a = analyzer_project(&q1, &cfg.with_theta(PI / 2.0)).unwrap()[1];
        let b = analyzer_project(&q1, &cfg.with_theta(-PI / 2.0)).unwrap()[1];
        assert!((visibility(a.max(b), a.min(b)) - 1.0).abs() < 1e-12);

        let shifted = AnalyzerConfig { detuning: 1.25e6, ..cfg };
        assert!((shifted.theta() - PI / 2.0).abs() < 1e-12);

        let mismatched = AnalyzerConfig { storage_time: 250e-9, ..cfg };
        assert!(analyzer_project(&plus, &mismatched).is_err());
    }

    #[test]
    fn analyzer_passivity_bound() {
        let ok = AnalyzerConfig { storage_time: 1e-7, p0: 1.0 / 3.0, p1: 1.0 / 3.0, detuning: 0.0 };
        assert!(ok.validate().is_ok());
        let bad = AnalyzerConfig { p0: 0.5, p1: 0.5, ..ok };
        assert!(bad.validate().is_err());
        // Total output never exceeds one for admissible settings.
        for k in 0..16 {
            let q = TimeBinState::equator(k as f64 * 0.4, 1e-7);
            let p = analyzer_project(&q, &ok.with_theta(0.3)).unwrap();
            assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn fringe_fit_recovers_phase() {
        let sep = 200e-9;
        for k in 0..12 {
            let phase = -PI + 0.1 + k as f64 * 0.5;
            let q = TimeBinState::equator(phase, sep);
            let cfg = AnalyzerConfig::balanced(sep, 0.0);
            let thetas: Vec<f64> = (0..24).map(|i| i as f64 * 2.0 * PI / 24.0).collect();
            let ys: Vec<f64> = thetas.iter().map(|&t| analyzer_project(&q, &cfg.with_theta(t)).unwrap()[1]).collect();
            let f = fit_fringe(&thetas, &ys).unwrap();
            let diff = (f.phase - phase + PI).rem_euclid(2.0 * PI) - PI;
            assert!(diff.abs() < 1e-6);
            assert!((f.visibility() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fidelity_formulas() {
        assert!((fidelity_from_visibility(0.985) - 0.9925).abs() < 1e-15);
        assert_eq!(signal_noise_fidelity(100.0, 0.0), 1.0);
        assert!((signal_noise_fidelity(99.0, 1.0) - 100.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn window_fraction() {
        assert!((gaussian_window_fraction(0.0, 1.0, -50.0, 100.0) - 1.0).abs() < 1e-15);
        assert!((gaussian_window_fraction(0.0, 1.0, 0.0, 50.0) - 0.5).abs() < 1e-15);
        // Half maximum points enclose 76.1% of a Gaussian.
        assert!((gaussian_window_fraction(0.0, 2.0, -1.0, 2.0) - 0.760968).abs() < 1e-6);
    }

    #[test]
    fn configs_round_trip_as_flat_json() {
        let comb = CombConfig::device(1.5e5);
        let text = serde_json::to_string(&comb).unwrap();
        assert!(text.contains("\"delta\":2000000.0"));
        assert_eq!(serde_json::from_str::<CombConfig>(&text).unwrap(), comb);
        let ctrl = device_with(&[(100e-9, 1)]);
        let back: StarkControl = serde_json::from_str(&serde_json::to_string(&ctrl).unwrap()).unwrap();
        assert_eq!(back, ctrl);
    }
}
