//! The 11-channel memory array: per-channel configuration, optical and
//! electrical crosstalk, and path-qudit storage.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::afc::{self, CombConfig, Emission, StarkControl};
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, ComplexVector};
use crate::quantum::{DensityMatrix, PureState};

pub const CHANNEL_COUNT: usize = 11;
/// Write-AOD tone of channel 1 and the spacing between channels.
pub const RF_BASE: f64 = 65.75e6;
pub const RF_STEP: f64 = 3.85e6;
pub const PATH_EFFICIENCY_RANGE: (f64, f64) = (0.16, 0.52);

/// AOD tone for a 1-based channel index.
pub fn rf_frequency(index: usize) -> Result<f64> {
    check_index(index)?;
    Ok(RF_BASE + (index - 1) as f64 * RF_STEP)
}

fn check_index(index: usize) -> Result<()> {
    if !(1..=CHANNEL_COUNT).contains(&index) {
        return Err(Error::Channel(format!("channel index {index} outside 1..={CHANNEL_COUNT}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub index: usize,
    pub comb: CombConfig,
    pub stark: StarkControl,
    /// End-to-end optical efficiency outside the memory.
    pub path_efficiency: f64,
    pub rf_frequency: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        check_index(self.index)?;
        self.comb.validate()?;
        self.stark.validate()?;
        if !(0.0..=1.0).contains(&self.path_efficiency) {
            return Err(Error::param("path_efficiency", "must lie in [0, 1]"));
        }
        let expected = rf_frequency(self.index)?;
        if (self.rf_frequency - expected).abs() > 1.0 {
            return Err(Error::Channel(format!(
                "channel {} tone {} Hz is off the AOD grid ({} Hz)",
                self.index, self.rf_frequency, expected
            )));
        }
        Ok(())
    }
}

/// Device-like array: shared comb and electrode model, path efficiencies
/// spread evenly over the measured 16–52% range.
pub fn default_array(comb: CombConfig) -> Vec<ChannelConfig> {
    let (lo, hi) = PATH_EFFICIENCY_RANGE;
    (1..=CHANNEL_COUNT)
        .map(|index| ChannelConfig {
            index,
            comb,
            stark: StarkControl::device(),
            path_efficiency: lo + (hi - lo) * (index - 1) as f64 / (CHANNEL_COUNT - 1) as f64,
            rf_frequency: RF_BASE + (index - 1) as f64 * RF_STEP,
        })
        .collect()
}

/// Array with unit path efficiency on every channel.
pub fn ideal_array(comb: CombConfig) -> Vec<ChannelConfig> {
    default_array(comb).into_iter().map(|ch| ChannelConfig { path_efficiency: 1.0, ..ch }).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageMode {
    /// Leaked light adds counts without interfering.
    #[default]
    Incoherent,
    /// Leaked amplitude adds in phase to the target channel.
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkModel {
    /// `optical_db[i][j]`: counts seen on channel j+1 relative to channel
    /// i+1 when light is stored in i+1. `null` in JSON means no leakage.
    #[serde(with = "db_matrix")]
    pub optical_db: Vec<Vec<f64>>,
    /// Field on a neighboring waveguide as a fraction of the driven one.
    pub electrical_field_fraction: f64,
    #[serde(default)]
    pub mode: LeakageMode,
}

impl Default for CrosstalkModel {
    /// −40 dB between nearest neighbors, −60 dB further out, 5% stray field.
    fn default() -> Self {
        Self::uniform(-40.0, -60.0, 0.05)
    }
}

impl CrosstalkModel {
    pub fn uniform(neighbor_db: f64, far_db: f64, electrical_field_fraction: f64) -> Self {
        let optical_db = (0..CHANNEL_COUNT)
            .map(|i| {
                (0..CHANNEL_COUNT)
                    .map(|j| match i.abs_diff(j) {
                        0 => 0.0,
                        1 => neighbor_db,
                        _ => far_db,
                    })
                    .collect()
            })
            .collect();
        CrosstalkModel { optical_db, electrical_field_fraction, mode: LeakageMode::Incoherent }
    }

    pub fn none() -> Self {
        Self::uniform(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.optical_db.len() != CHANNEL_COUNT || self.optical_db.iter().any(|r| r.len() != CHANNEL_COUNT) {
            return Err(Error::Channel(format!("optical_db must be {CHANNEL_COUNT}×{CHANNEL_COUNT}")));
        }
        for (i, row) in self.optical_db.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(Error::Channel(format!("optical_db[{i}][{i}] must be 0 dB")));
            }
            if row.iter().any(|&v| v.is_nan() || v > 0.0) {
                return Err(Error::Channel(format!("optical_db row {i} has a positive or NaN entry")));
            }
        }
        if !(0.0..=1.0).contains(&self.electrical_field_fraction) {
            return Err(Error::param("electrical_field_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Intensity fraction leaking from channel `from` into `to` (1-based).
    pub fn leakage(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        db_to_ratio(self.optical_db[from - 1][to - 1])
    }
}

pub fn db_to_ratio(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Crosstalk `10·log₁₀(n_ij/n_ii)` in dB; −∞ when no counts leak.
pub fn optical_crosstalk_db(counts_ij: f64, counts_ii: f64) -> Result<f64> {
    if !(counts_ii > 0.0) {
        return Err(Error::param("counts_ii", "diagonal counts must be positive"));
    }
    if !(counts_ij >= 0.0) {
        return Err(Error::param("counts_ij", "must be non-negative"));
    }
    Ok(10.0 * (counts_ij / counts_ii).log10())
}

mod db_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<f64>>> =
            m.iter().map(|r| r.iter().map(|&v| (v != f64::NEG_INFINITY).then_some(v)).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let rows: Vec<Vec<Option<f64>>> = Vec::deserialize(d)?;
        Ok(rows.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect()).collect())
    }
}

/// Σ aₙ|Cₙ⟩ over distinct 1-based channel indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub channels: Vec<usize>,
    pub coefficients: Vec<Complex64>,
}

impl PathState {
    pub fn new(channels: Vec<usize>, coefficients: Vec<Complex64>) -> Result<Self> {
        let s = PathState { channels, coefficients };
        s.validate()?;
        Ok(s)
    }

    /// Normalizes the coefficients before validating.
    pub fn normalized(channels: Vec<usize>, coefficients: Vec<Complex64>) -> Result<Self> {
        let norm = coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Self::new(channels, coefficients.into_iter().map(|z| z / norm).collect())
    }

    pub fn single(channel: usize) -> Result<Self> {
        Self::new(vec![channel], vec![c(1.0, 0.0)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != self.coefficients.len() || self.channels.is_empty() {
            return Err(Error::Channel("channels and coefficients must match and be non-empty".into()));
        }
        for (k, &ch) in self.channels.iter().enumerate() {
            check_index(ch)?;
            if self.channels[..k].contains(&ch) {
                return Err(Error::Channel(format!("channel {ch} listed twice")));
            }
        }
        let norm_sq: f64 = self.coefficients.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(())
    }

    pub fn amplitude(&self, channel: usize) -> Complex64 {
        self.channels.iter().position(|&ch| ch == channel).map_or(c(0.0, 0.0), |k| self.coefficients[k])
    }

    /// Amplitudes in the order of `basis` (channels outside this state are 0).
    pub fn vector_on(&self, basis: &[usize]) -> ComplexVector {
        ComplexVector::from_iterator(basis.len(), basis.iter().map(|&ch| self.amplitude(ch)))
    }

    pub fn to_pure_state(&self) -> PureState {
        PureState::new(ComplexVector::from_column_slice(&self.coefficients)).expect("validated on construction")
    }
}

/// `|⟨setting|output⟩|²`, with channels missing from either side as zeros.
pub fn encode_measurement(setting: &PathState, output: &PathState) -> f64 {
    setting
        .channels
        .iter()
        .zip(&setting.coefficients)
        .map(|(&ch, a)| a.conj() * output.amplitude(ch))
        .sum::<Complex64>()
        .norm_sqr()
}

/// Read-AOD setting (|Cₙ⟩ + e^{iφ}|Cₘ⟩)/√2.
pub fn two_channel_setting(n: usize, m: usize, phase: f64) -> Result<PathState> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    PathState::new(vec![n, m], vec![c(s, 0.0), Complex64::from_polar(s, phase)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub channel: usize,
    pub emission: Emission,
    /// Memory efficiency including electrical-crosstalk loss.
    pub memory_efficiency: f64,
    /// Amplitude factor from stray neighbor fields.
    pub crosstalk_factor: f64,
}

#[derive(Debug, Clone)]
pub struct StorageOutput {
    /// Channels spanning the output space (those of the input state).
    pub channels: Vec<usize>,
    /// Output with detection-probability weights: ⟨s|M|s⟩ is the chance a
    /// single input photon is detected in setting s.
    pub unnormalized: ComplexMatrix,
    pub density: DensityMatrix,
    /// Coherent part of the output, renormalized.
    pub state: PathState,
    /// Σ|aₙ|²ηₙ before renormalization.
    pub memory_efficiency: f64,
    /// Same, including path efficiencies.
    pub total_efficiency: f64,
    pub echo_time: f64,
    pub per_channel: Vec<ChannelReport>,
}

impl StorageOutput {
    pub fn detection_probability(&self, setting: &PathState) -> f64 {
        let v = setting.vector_on(&self.channels);
        (v.adjoint() * &self.unnormalized * &v)[(0, 0)].re.max(0.0)
    }
}

/// Amplitude factor on a stored photon from neighbor-electrode pulses that
/// fall inside `[0, storage_end]`. Neighbor pulses identical to the
/// channel's own (a shared drive) only rescale its calibrated field and are
/// skipped.
pub fn electrical_crosstalk_factor(
    own: &StarkControl,
    neighbors: &[&StarkControl],
    fraction: f64,
    storage_end: f64,
) -> f64 {
    if fraction <= 0.0 {
        return 1.0;
    }
    let mut area = 0.0;
    for nb in neighbors {
        for p in &nb.pulses {
            if own.pulses.contains(p) {
                continue;
            }
            let lo = p.start.max(0.0);
            let hi = p.end().min(storage_end);
            if hi > lo {
                area += p.polarity as f64 * (hi - lo);
            }
        }
    }
    let stray = own.scaled(fraction);
    afc::echo_amplitude_factor(&stray, area.abs()).abs()
}

/// Efficiency loss `1 − f²` of a channel next to an electrode driven with a
/// single pulse of the given duration.
pub fn neighbor_degradation(drive: &StarkControl, fraction: f64, pulse_duration: f64) -> f64 {
    if fraction <= 0.0 {
        return 0.0;
    }
    let f = afc::echo_amplitude_factor(&drive.scaled(fraction), pulse_duration);
    1.0 - f * f
}

/// Stores `state` across its channels and reads it back at a common echo
/// time. `controls` carries each driven channel's pulse sequence; channels
/// without an entry are undriven. Leakage into channels outside the state
/// leaves the analyzed space and counts as loss.
pub fn store_and_retrieve(
    state: &PathState,
    array: &[ChannelConfig],
    xtalk: &CrosstalkModel,
    controls: &BTreeMap<usize, StarkControl>,
) -> Result<StorageOutput> {
    state.validate()?;
    xtalk.validate()?;
    let config = |ch: usize| {
        array
            .iter()
            .find(|cfg| cfg.index == ch)
            .ok_or_else(|| Error::Channel(format!("no configuration for channel {ch}")))
    };
    let undriven = |ch: usize| -> Result<StarkControl> {
        let cfg = config(ch)?;
        Ok(StarkControl { pulses: Vec::new(), ..cfg.stark.clone() })
    };
    let control_for = |ch: usize| -> Result<StarkControl> {
        match controls.get(&ch) {
            Some(ctrl) => Ok(ctrl.clone()),
            None => undriven(ch),
        }
    };

    let mut reports = Vec::with_capacity(state.channels.len());
    let mut delta = None;
    let mut echo_time = None;
    for &ch in &state.channels {
        let cfg = config(ch)?;
        cfg.validate()?;
        match delta {
            None => delta = Some(cfg.comb.delta),
            Some(d) if (d - cfg.comb.delta).abs() > 1e-9 * d => {
                return Err(Error::Channel(format!("channel {ch} has Δ = {} Hz, expected {d} Hz", cfg.comb.delta)));
            }
            _ => {}
        }
        let ctrl = control_for(ch)?;
        let emission = afc::emission_time(&cfg.comb, &ctrl)?;
        let time =
            emission.echo_time().ok_or_else(|| Error::Channel(format!("channel {ch} never releases its echo")))?;
        match echo_time {
            None => echo_time = Some(time),
            Some(t) if (t - time).abs() > 1e-12 * t => {
                return Err(Error::Channel(format!("channel {ch} echoes at {time} s, others at {t} s")));
            }
            _ => {}
        }
        let neighbor_ctrls: Vec<StarkControl> = [ch.wrapping_sub(1), ch + 1]
            .into_iter()
            .filter(|&nb| (1..=CHANNEL_COUNT).contains(&nb))
            .filter_map(|nb| controls.get(&nb).cloned())
            .collect();
        let refs: Vec<&StarkControl> = neighbor_ctrls.iter().collect();
        let factor = electrical_crosstalk_factor(&ctrl, &refs, xtalk.electrical_field_fraction, time);
        reports.push(ChannelReport {
            channel: ch,
            emission,
            memory_efficiency: emission.efficiency() * factor * factor,
            crosstalk_factor: factor,
        });
    }

    let n = state.channels.len();
    let signal: Vec<Complex64> = state
        .coefficients
        .iter()
        .zip(&reports)
        .map(|(a, r)| {
            let path = config(r.channel).map(|cfg| cfg.path_efficiency).unwrap_or(0.0);
            a * (r.memory_efficiency * path).sqrt()
        })
        .collect();
    let memory_efficiency: f64 =
        state.coefficients.iter().zip(&reports).map(|(a, r)| a.norm_sqr() * r.memory_efficiency).sum();

    let mut coherent = signal.clone();
    let mut unnormalized = ComplexMatrix::zeros(n, n);
    for (j, &to) in state.channels.iter().enumerate() {
        for (i, &from) in state.channels.iter().enumerate() {
            let leak = xtalk.leakage(from, to);
            if leak == 0.0 {
                continue;
            }
            match xtalk.mode {
                LeakageMode::Coherent => coherent[j] += signal[i] * leak.sqrt(),
                LeakageMode::Incoherent => unnormalized[(j, j)] += c(signal[i].norm_sqr() * leak, 0.0),
            }
        }
    }
    let v = ComplexVector::from_column_slice(&coherent);
    unnormalized += &v * v.adjoint();
    let total_efficiency = unnormalized.trace().re;
    if !(total_efficiency > 0.0) {
        return Err(Error::Channel("no light reaches the output".into()));
    }
    let density = DensityMatrix::from_unnormalized(unnormalized.clone())?;
    let state_out = PathState::normalized(state.channels.clone(), coherent)?;
    Ok(StorageOutput {
        channels: state.channels.clone(),
        unnormalized,
        density,
        state: state_out,
        memory_efficiency,
        total_efficiency,
        echo_time: echo_time.expect("state has at least one channel"),
        per_channel: reports,
    })
}

/// Pulse pair for echo order `n` on each listed channel, all with the same
/// polarity (a common drive).
pub fn common_controls(array: &[ChannelConfig], channels: &[usize], n: u32) -> Result<BTreeMap<usize, StarkControl>> {
    let mut out = BTreeMap::new();
    for &ch in channels {
        let cfg = array
            .iter()
            .find(|cfg| cfg.index == ch)
            .ok_or_else(|| Error::Channel(format!("no configuration for channel {ch}")))?;
        let pulses = afc::pulses_for_order(&cfg.comb, &cfg.stark, n, 1)?;
        out.insert(ch, cfg.stark.with_pulses(pulses)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afc::StarkPulse;
    use crate::quantum::fidelity_pure;
    use proptest::prelude::*;

    fn comb() -> CombConfig {
        CombConfig::device(0.0)
    }

    #[test]
    fn rf_grid() {
        assert_eq!(rf_frequency(1).unwrap(), 65.75e6);
        assert!((rf_frequency(11).unwrap() - 104.25e6).abs() < 1e-3);
        assert!(rf_frequency(0).is_err());
        assert!(rf_frequency(12).is_err());
        for ch in default_array(comb()) {
            ch.validate().unwrap();
            assert!((0.16..=0.52 + 1e-12).contains(&ch.path_efficiency));
        }
        let mut bad = default_array(comb())[0].clone();
        bad.rf_frequency += 1e5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn crosstalk_db_examples() {
        assert_eq!(optical_crosstalk_db(5.0, 5.0).unwrap(), 0.0);
        assert!((optical_crosstalk_db(1e-4, 1.0).unwrap() + 40.0).abs() < 1e-12);
        assert!((optical_crosstalk_db(1e-2, 1.0).unwrap() + 20.0).abs() < 1e-12);
        assert!(optical_crosstalk_db(1.0, 0.0).is_err());
        assert_eq!(optical_crosstalk_db(0.0, 1.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn single_channel_round_trip() {
        let array = ideal_array(comb());
        // 0.5 µs storage is the first echo of the 2 MHz comb: no pulses.
        let out = store_and_retrieve(&PathState::single(4).unwrap(), &array, &CrosstalkModel::none(), &BTreeMap::new())
            .unwrap();
        assert!((out.echo_time - 0.5e-6).abs() < 1e-18);
        let psi = PathState::single(4).unwrap();
        assert!((encode_measurement(&psi, &out.state) - 1.0).abs() < 1e-15);
        assert!((out.memory_efficiency - afc::afc_efficiency(&comb(), 0.5e-6)).abs() < 1e-15);
    }

    #[test]
    fn balanced_superposition_is_preserved() {
        let array = ideal_array(comb());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = PathState::new(vec![6, 7], vec![c(s, 0.0), c(0.0, s)]).unwrap();
        let ctrls = common_controls(&array, &[6, 7], 2).unwrap();
        let out = store_and_retrieve(&psi, &array, &CrosstalkModel::none(), &ctrls).unwrap();
        assert!((out.echo_time - 1.0e-6).abs() < 1e-18);
        assert!((encode_measurement(&psi, &out.state) - 1.0).abs() < 1e-14);
        assert!((fidelity_pure(&out.density, &psi.to_pure_state()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_efficiency_oracle() {
        // ψ₁ over channels 5..9 with per-channel efficiencies spread ±1% around 30%.
        let etas = [0.29, 0.295, 0.30, 0.305, 0.31];
        let channels: Vec<usize> = (5..=9).collect();
        let a = 1.0 / 5f64.sqrt();
        let psi = PathState::new(channels.clone(), vec![c(a, 0.0); 5]).unwrap();
        let base = comb();
        let dt = base.effective_depth();
        let prefactor = dt * dt * (-dt).exp();
        let array: Vec<ChannelConfig> = ideal_array(base)
            .into_iter()
            .map(|mut ch| {
                if let Some(k) = channels.iter().position(|&c| c == ch.index) {
                    // γ̃ chosen so that η(0.5 µs) hits the target.
                    ch.comb.gamma_tilde = ((prefactor / etas[k]).ln()).sqrt() / 0.5e-6;
                }
                ch
            })
            .collect();
        let out = store_and_retrieve(&psi, &array, &CrosstalkModel::none(), &BTreeMap::new()).unwrap();
        let mean: f64 = etas.iter().sum::<f64>() / 5.0;
        assert!((out.memory_efficiency - mean).abs() < 1e-12);
        let oracle = etas.iter().map(|e| e.sqrt()).sum::<f64>().powi(2) / (5.0 * etas.iter().sum::<f64>());
        let f = encode_measurement(&psi, &out.state);
        assert!((f - oracle).abs() < 1e-12);
        assert!(f >= 0.99);
    }

    #[test]
    fn delta_mismatch_rejected() {
        let mut array = ideal_array(comb());
        array[5].comb.delta = 1e6;
        let psi = PathState::normalized(vec![5, 6], vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(store_and_retrieve(&psi, &array, &CrosstalkModel::none(), &BTreeMap::new()).is_err());
        assert!(store_and_retrieve(&psi, &array[..4], &CrosstalkModel::none(), &BTreeMap::new()).is_err());
    }

    #[test]
    fn electrical_degradation_below_one_percent() {
        let drive = StarkControl::device();
        for fraction in [0.04, 0.05] {
            let loss = neighbor_degradation(&drive, fraction, 50e-9);
            assert!(loss > 0.0 && loss < 0.01, "fraction {fraction}: {loss}");
        }
    }

    #[test]
    fn independent_neighbor_drive_costs_efficiency() {
        let array = ideal_array(comb());
        let psi = PathState::single(5).unwrap();
        let mut ctrls = common_controls(&array, &[5], 2).unwrap();
        let quiet = store_and_retrieve(&psi, &array, &CrosstalkModel::default(), &ctrls).unwrap();
        let w = afc::suppression_pulse_duration(&StarkControl::device()).unwrap();
        // Neighbor 6 suppresses a photon of its own at a different time.
        let nb =
            StarkControl::device().with_pulses(vec![StarkPulse { start: 300e-9, duration: w, polarity: 1 }]).unwrap();
        ctrls.insert(6, nb);
        let noisy = store_and_retrieve(&psi, &array, &CrosstalkModel::default(), &ctrls).unwrap();
        let loss = 1.0 - noisy.memory_efficiency / quiet.memory_efficiency;
        assert!(loss > 0.0 && loss < 0.01);
        assert!((loss - neighbor_degradation(&StarkControl::device(), 0.05, w)).abs() < 1e-12);
    }

    #[test]
    fn encode_measurement_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PathState::new(vec![6, 7], vec![c(s, 0.), c(s, 0.)]).unwrap();
        let minus = PathState::new(vec![6, 7], vec![c(s, 0.), c(-s, 0.)]).unwrap();
        assert!((encode_measurement(&plus, &plus) - 1.0).abs() < 1e-15);
        assert!(encode_measurement(&plus, &minus) < 1e-30);
        let fringe: Vec<f64> = (0..16)
            .map(|k| {
                let phi = k as f64 * std::f64::consts::PI / 8.0;
                encode_measurement(&two_channel_setting(6, 7, phi).unwrap(), &plus)
            })
            .collect();
        for (k, v) in fringe.iter().enumerate() {
            let phi = k as f64 * std::f64::consts::PI / 8.0;
            assert!((v - (phi / 2.0).cos().powi(2)).abs() < 1e-14);
        }
        let max = fringe.iter().cloned().fold(0.0, f64::max);
        let min = fringe.iter().cloned().fold(1.0, f64::min);
        assert!((afc::visibility(max, min) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crosstalk_json_round_trip_keeps_infinities() {
        let x = CrosstalkModel::none();
        let text = serde_json::to_string(&x).unwrap();
        assert!(text.contains("null"));
        let back: CrosstalkModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, x);
    }

    fn off_channel_probability(db: f64, mode: LeakageMode) -> f64 {
        let array = ideal_array(comb());
        let mut x = CrosstalkModel::uniform(db, db, 0.0);
        x.mode = mode;
        let psi = PathState::normalized(vec![4, 5], vec![c(1.0, 0.0), c(1e-9, 0.0)]).unwrap();
        let out = store_and_retrieve(&psi, &array, &x, &BTreeMap::new()).unwrap();
        out.detection_probability(&PathState::single(5).unwrap())
    }

    #[test]
    fn no_crosstalk_matches_crosstalk_free() {
        for mode in [LeakageMode::Incoherent, LeakageMode::Coherent] {
            let clean = off_channel_probability(f64::NEG_INFINITY, mode);
            let expect = afc::afc_efficiency(&comb(), 0.5e-6) * 1e-18 / (1.0 + 1e-18);
            assert!((clean - expect).abs() < 1e-24);
        }
    }

    proptest! {
        #[test]
        fn leakage_monotone_in_db(a in -80.0f64..-10.0, b in -80.0f64..-10.0) {
            prop_assume!((a - b).abs() > 1e-3);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            for mode in [LeakageMode::Incoherent, LeakageMode::Coherent] {
                prop_assert!(off_channel_probability(lo, mode) < off_channel_probability(hi, mode));
            }
        }
    }
}
