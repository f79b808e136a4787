//! Random-access read-out schedules for time-bin qubits stored in separate
//! channels.
//!
//! Qubits are written one after another through the write AOD. Each channel
//! receives a suppression pulse after its late bin is absorbed and a recall
//! pulse of opposite polarity just before the chosen echo `n/Δ`. The read
//! AOD must settle between consecutive retrievals.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::afc::{
    self, afc_efficiency, analyzer_project, emission_time, fit_gamma_tilde, signal_noise_fidelity,
    suppression_pulse_duration, AnalyzerConfig, CombConfig, StarkControl, StarkPulse, TimeBinState,
};
use crate::array::{electrical_crosstalk_factor, ChannelConfig};
use crate::counts::{sample_counts, CountRecord, DetectorConfig, TimeBin};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_RISE_TIME: f64 = 1.9e-6;
pub const DEFAULT_BIN_SEPARATION: f64 = 200e-9;
pub const DEFAULT_DELTA: f64 = 200e3;
/// Input wavepacket FWHM.
pub const DEFAULT_PULSE_FWHM: f64 = 50e-9;
/// Extra idle time between consecutive writes.
pub const WRITE_GUARD: f64 = 100e-9;
pub const DEFAULT_N_MAX: u32 = 10;
/// Relative tolerance for timing comparisons.
const TIMING_TOL: f64 = 1e-9;

/// Comb for the random-access channels: finesse of the 2 MHz device comb,
/// with decay and depth calibrated so that the 2nd and 5th echoes at
/// Δ = 200 kHz carry 18.7% and 2.9%.
pub fn raqm_comb() -> CombConfig {
    let (t_hi, eta_hi, t_lo, eta_lo) = (2.0 / DEFAULT_DELTA, 0.187, 5.0 / DEFAULT_DELTA, 0.029);
    let gamma_tilde = fit_gamma_tilde(t_hi, eta_hi, t_lo, eta_lo).expect("calibration points are valid");
    let eta0 = eta_hi * (t_hi * t_hi * gamma_tilde * gamma_tilde).exp();
    // d̃²e^{−d̃} is increasing on [0, 2].
    let (mut lo, mut hi) = (0.0_f64, 2.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid * (-mid).exp() < eta0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let finesse = 8.7;
    let depth = 0.5 * (lo + hi) * finesse / (PI / (4.0 * 2f64.ln())).sqrt();
    CombConfig { delta: DEFAULT_DELTA, finesse, peak_depth: depth, gamma_tilde }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSlot {
    pub id: usize,
    pub channel: usize,
    pub state: TimeBinState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Template for pulse widths; each pulse lasts 1/(4Ω).
    pub control: StarkControl,
    pub aod_rise_time: f64,
    pub pulse_fwhm: f64,
    pub write_guard: f64,
    pub n_max: u32,
    pub first_write: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            control: StarkControl::device(),
            aod_rise_time: DEFAULT_RISE_TIME,
            pulse_fwhm: DEFAULT_PULSE_FWHM,
            write_guard: WRITE_GUARD,
            n_max: DEFAULT_N_MAX,
            first_write: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteEvent {
    pub qubit: usize,
    pub channel: usize,
    /// Arrival of the early bin, s.
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadEvent {
    pub qubit: usize,
    pub channel: usize,
    /// Emission of the early-bin echo, s.
    pub time: f64,
    pub echo_order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub delta: f64,
    pub bin_separation: f64,
    pub pulse_fwhm: f64,
    pub aod_rise_time: f64,
    pub qubits: Vec<QubitSlot>,
    /// Requested read-out order of qubit ids.
    pub order: Vec<usize>,
    pub writes: Vec<WriteEvent>,
    /// Sorted by time.
    pub reads: Vec<ReadEvent>,
    /// Absolute pulse times per channel.
    pub electric_pulses: BTreeMap<usize, Vec<StarkPulse>>,
}

impl Schedule {
    /// Qubit ids in order of read time.
    pub fn read_order(&self) -> Vec<usize> {
        let mut reads = self.reads.clone();
        reads.sort_by(|a, b| a.time.total_cmp(&b.time));
        reads.iter().map(|r| r.qubit).collect()
    }

    pub fn write_of(&self, qubit: usize) -> Option<&WriteEvent> {
        self.writes.iter().find(|w| w.qubit == qubit)
    }

    pub fn read_of(&self, qubit: usize) -> Option<&ReadEvent> {
        self.reads.iter().find(|r| r.qubit == qubit)
    }

    /// AOD occupancy of one write or read: both bins plus the pulse tails.
    fn occupancy(&self) -> f64 {
        self.bin_separation + 2.0 * self.pulse_fwhm
    }

    /// Time-sorted event list `time,kind,qubit,channel,detail`.
    pub fn timeline_csv(&self) -> String {
        let mut rows: Vec<(f64, String)> = Vec::new();
        for w in &self.writes {
            rows.push((w.time, format!("write,{},{},", w.qubit, w.channel)));
        }
        for r in &self.reads {
            rows.push((r.time, format!("read,{},{},n={}", r.qubit, r.channel, r.echo_order)));
        }
        for (ch, pulses) in &self.electric_pulses {
            let qubit = self.qubits.iter().find(|q| q.channel == *ch).map_or(String::new(), |q| q.id.to_string());
            for p in pulses {
                rows.push((p.start, format!("pulse_start,{qubit},{ch},polarity={}", p.polarity)));
                rows.push((p.end(), format!("pulse_end,{qubit},{ch},polarity={}", p.polarity)));
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let mut out = String::from("time,kind,qubit,channel,detail\n");
        for (t, rest) in rows {
            let _ = writeln!(out, "{t:e},{rest}");
        }
        out
    }
}

/// Legal suppression and recall windows (absolute) for a write at `w`.
fn windows(w: f64, n: u32, delta: f64, sep: f64, fwhm: f64) -> ((f64, f64), (f64, f64)) {
    let period = 1.0 / delta;
    ((w + sep + fwhm, w + period), (w + (n - 1) as f64 * period + sep + fwhm, w + n as f64 * period))
}

fn centered(window: (f64, f64), width: f64, polarity: i8) -> StarkPulse {
    StarkPulse { start: 0.5 * (window.0 + window.1 - width), duration: width, polarity }
}

/// Plans writes in slot order and reads in the requested order, each at the
/// smallest echo order `n ≥ 2` that keeps the read AOD settled.
pub fn build_schedule(
    qubits: &[QubitSlot],
    order: &[usize],
    array: &[ChannelConfig],
    cfg: &PlanConfig,
) -> Result<Schedule> {
    if qubits.is_empty() {
        return Err(Error::param("qubits", "nothing to schedule"));
    }
    let ids: BTreeSet<usize> = qubits.iter().map(|q| q.id).collect();
    if ids.len() != qubits.len() {
        return Err(Error::param("qubits", "duplicate qubit id"));
    }
    let mut seen = BTreeSet::new();
    for q in qubits {
        if !seen.insert(q.channel) {
            return Err(Error::Channel(format!("channel {} holds more than one qubit", q.channel)));
        }
    }
    let requested: BTreeSet<usize> = order.iter().copied().collect();
    if order.len() != qubits.len() || requested != ids {
        return Err(Error::param("order", format!("{order:?} is not a permutation of {ids:?}")));
    }
    let sep = qubits[0].state.bin_separation;
    if qubits.iter().any(|q| (q.state.bin_separation - sep).abs() > TIMING_TOL * sep) {
        return Err(Error::param("bin_separation", "must be common to all qubits"));
    }
    let mut delta = None;
    for q in qubits {
        let ch = array
            .iter()
            .find(|c| c.index == q.channel)
            .ok_or_else(|| Error::Channel(format!("channel {} not in array", q.channel)))?;
        ch.comb.validate()?;
        match delta {
            None => delta = Some(ch.comb.delta),
            Some(d) if (ch.comb.delta - d).abs() > TIMING_TOL * d => {
                return Err(Error::Channel(format!(
                    "comb spacing {} Hz on channel {} differs from {d} Hz",
                    ch.comb.delta, q.channel
                )))
            }
            Some(_) => {}
        }
    }
    let delta = delta.expect("at least one qubit");
    let period = 1.0 / delta;
    if !(cfg.aod_rise_time >= 0.0 && cfg.pulse_fwhm >= 0.0 && cfg.write_guard >= 0.0) {
        return Err(Error::param("plan", "rise time, FWHM and guard must be non-negative"));
    }
    let width = suppression_pulse_duration(&cfg.control)?;
    if sep + cfg.pulse_fwhm + width > period {
        return Err(Error::PulseTiming(format!(
            "qubit ({:.3e} s) and pulse ({width:.3e} s) do not fit before 1/Δ = {period:.3e} s",
            sep + cfg.pulse_fwhm
        )));
    }

    let occupancy = sep + 2.0 * cfg.pulse_fwhm;
    let spacing = occupancy + cfg.aod_rise_time + cfg.write_guard;
    let writes: Vec<WriteEvent> = qubits
        .iter()
        .enumerate()
        .map(|(k, q)| WriteEvent { qubit: q.id, channel: q.channel, time: cfg.first_write + k as f64 * spacing })
        .collect();

    let min_gap = occupancy + cfg.aod_rise_time;
    let mut reads = Vec::with_capacity(order.len());
    let mut previous: Option<f64> = None;
    for &id in order {
        let w = writes.iter().find(|w| w.qubit == id).expect("order checked against ids");
        let n = (2..=cfg.n_max)
            .find(|&n| {
                let t = w.time + n as f64 * period;
                previous.is_none_or(|p| t - p >= min_gap * (1.0 - TIMING_TOL))
            })
            .ok_or_else(|| {
                Error::Infeasible(format!("qubit {id} cannot be read in order {order:?} with n ≤ {}", cfg.n_max))
            })?;
        let time = w.time + n as f64 * period;
        previous = Some(time);
        reads.push(ReadEvent { qubit: id, channel: w.channel, time, echo_order: n });
    }

    let mut electric_pulses = BTreeMap::new();
    for r in &reads {
        let w = writes.iter().find(|w| w.qubit == r.qubit).expect("every read has a write");
        let (suppress, recall) = windows(w.time, r.echo_order, delta, sep, cfg.pulse_fwhm);
        electric_pulses.insert(r.channel, vec![centered(suppress, width, 1), centered(recall, width, -1)]);
    }

    Ok(Schedule {
        delta,
        bin_separation: sep,
        pulse_fwhm: cfg.pulse_fwhm,
        aod_rise_time: cfg.aod_rise_time,
        qubits: qubits.to_vec(),
        order: order.to_vec(),
        writes,
        reads,
        electric_pulses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MissingEvent,
    ChannelCollision,
    CombMismatch,
    EchoGrid,
    PulseCount,
    Polarity,
    SuppressionWindow,
    RecallWindow,
    WriteSpacing,
    RiseTime,
    ReadOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub first: String,
    pub second: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {} / {}: {}", self.rule, self.first, self.second, self.detail)
    }
}

/// Every violated timing constraint; empty when the schedule is sound.
pub fn validate_schedule(s: &Schedule, comb: &CombConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push =
        |rule, first: String, second: String, detail: String| out.push(Violation { rule, first, second, detail });
    let period = 1.0 / comb.delta;
    let tol = TIMING_TOL * period;

    if (s.delta - comb.delta).abs() > TIMING_TOL * comb.delta {
        push(Rule::CombMismatch, "schedule".into(), "comb".into(), format!("Δ {} vs {}", s.delta, comb.delta));
    }
    let mut channels = BTreeMap::new();
    for w in &s.writes {
        if let Some(other) = channels.insert(w.channel, w.qubit) {
            push(
                Rule::ChannelCollision,
                format!("write q{other}"),
                format!("write q{}", w.qubit),
                format!("both on channel {}", w.channel),
            );
        }
    }
    for q in &s.qubits {
        if s.write_of(q.id).is_none() {
            push(Rule::MissingEvent, format!("q{}", q.id), "write".into(), "no write event".into());
        }
        if s.read_of(q.id).is_none() {
            push(Rule::MissingEvent, format!("q{}", q.id), "read".into(), "no read event".into());
        }
    }

    for r in &s.reads {
        let Some(w) = s.write_of(r.qubit) else { continue };
        let elapsed = (r.time - w.time) / period;
        let n = elapsed.round();
        if (elapsed - n).abs() > 1e-9 || n < 2.0 || n as u32 != r.echo_order {
            push(
                Rule::EchoGrid,
                format!("write q{}", r.qubit),
                format!("read q{}", r.qubit),
                format!("storage time is {elapsed:.9} × 1/Δ, echo order {}", r.echo_order),
            );
        }
        let pulses = s.electric_pulses.get(&r.channel).map(Vec::as_slice).unwrap_or(&[]);
        let [first, second] = pulses else {
            push(
                Rule::PulseCount,
                format!("channel {}", r.channel),
                format!("read q{}", r.qubit),
                format!("{} pulses, expected 2", pulses.len()),
            );
            continue;
        };
        if first.polarity == second.polarity || first.polarity.abs() != 1 || second.polarity.abs() != 1 {
            push(
                Rule::Polarity,
                format!("pulse ch{}#1", r.channel),
                format!("pulse ch{}#2", r.channel),
                "pulses must be ±1 with opposite polarity".into(),
            );
        }
        let (suppress, recall) = windows(w.time, n.max(2.0) as u32, s.delta, s.bin_separation, s.pulse_fwhm);
        if first.start < suppress.0 - tol || first.end() > suppress.1 + tol {
            push(
                Rule::SuppressionWindow,
                format!("write q{}", r.qubit),
                format!("pulse ch{}#1", r.channel),
                format!("[{:.6e}, {:.6e}] outside [{:.6e}, {:.6e}]", first.start, first.end(), suppress.0, suppress.1),
            );
        }
        if second.start < recall.0 - tol || second.end() > recall.1 + tol {
            push(
                Rule::RecallWindow,
                format!("pulse ch{}#2", r.channel),
                format!("read q{}", r.qubit),
                format!("[{:.6e}, {:.6e}] outside [{:.6e}, {:.6e}]", second.start, second.end(), recall.0, recall.1),
            );
        }
    }

    let occupancy = s.occupancy();
    let mut writes = s.writes.clone();
    writes.sort_by(|a, b| a.time.total_cmp(&b.time));
    for pair in writes.windows(2) {
        let gap = pair[1].time - pair[0].time - occupancy;
        if gap < s.aod_rise_time - tol {
            push(
                Rule::WriteSpacing,
                format!("write q{}", pair[0].qubit),
                format!("write q{}", pair[1].qubit),
                format!("AOD idle {gap:.3e} s < rise time {:.3e} s", s.aod_rise_time),
            );
        }
    }
    let mut reads = s.reads.clone();
    reads.sort_by(|a, b| a.time.total_cmp(&b.time));
    for pair in reads.windows(2) {
        let gap = pair[1].time - pair[0].time - occupancy;
        if gap < s.aod_rise_time - tol {
            push(
                Rule::RiseTime,
                format!("read q{}", pair[0].qubit),
                format!("read q{}", pair[1].qubit),
                format!("AOD idle {gap:.3e} s < rise time {:.3e} s", s.aod_rise_time),
            );
        }
    }
    let realized = s.read_order();
    if realized != s.order {
        push(
            Rule::ReadOrder,
            "order".into(),
            "reads".into(),
            format!("requested {:?}, realized {realized:?}", s.order),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trials: u64,
    pub mean_photon: f64,
    /// Standard deviation (rad) of Gaussian phase noise on each read.
    pub phase_jitter: f64,
    /// Mean background counts per bin per trial.
    pub background: f64,
    /// Poisson-sampled counts when true, expected counts otherwise.
    pub poisson: bool,
    /// Stray field fraction reaching the neighboring channels.
    pub electrical_field_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trials: 100_000,
            mean_photon: 0.76,
            phase_jitter: 0.0,
            background: 0.0,
            poisson: true,
            electrical_field_fraction: 0.0,
        }
    }
}

/// Phase-noise standard deviation that limits visibility to `v`.
pub fn jitter_for_visibility(v: f64) -> Result<f64> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::param("visibility", "must lie in (0, 1]"));
    }
    Ok((-2.0 * v.ln()).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitReport {
    pub qubit: usize,
    pub channel: usize,
    pub echo_order: u32,
    pub write_time: f64,
    pub read_time: f64,
    /// Memory efficiency at the realized storage time.
    pub memory_efficiency: f64,
    /// Including the channel's path efficiency.
    pub detection_efficiency: f64,
    pub f_early: f64,
    pub f_late: f64,
    /// (|e⟩ + i|l⟩)/√2.
    pub f_plus_i: f64,
    /// (|e⟩ + e^{i3π/4}|l⟩)/√2.
    pub f_three_quarter: f64,
    pub f_el: f64,
    pub f_pm: f64,
    pub f_total: f64,
    /// Fidelity of the stored qubit itself.
    pub f_state: f64,
    pub records: Vec<CountRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub order: Vec<usize>,
    pub seed: u64,
    pub qubits: Vec<QubitReport>,
}

impl RunReport {
    /// One row per qubit, in qubit-id order.
    pub fn fidelity_csv(&self) -> String {
        let mut out = String::from(
            "qubit,channel,echo_order,read_time,memory_efficiency,f_early,f_late,f_plus_i,f_three_quarter,f_total,f_state\n",
        );
        let mut rows: Vec<&QubitReport> = self.qubits.iter().collect();
        rows.sort_by_key(|q| q.qubit);
        for q in rows {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
                q.qubit,
                q.channel,
                q.echo_order,
                q.read_time,
                q.memory_efficiency,
                q.f_early,
                q.f_late,
                q.f_plus_i,
                q.f_three_quarter,
                q.f_total,
                q.f_state
            );
        }
        out
    }
}

struct Detector<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    efficiency: f64,
    bins: Vec<TimeBin>,
}

impl Detector<'_> {
    /// Counts (as reals) and the record for one setting.
    fn measure(&self, setting_id: String, probabilities: &[f64]) -> Result<(Vec<f64>, CountRecord)> {
        let ps: Vec<f64> = probabilities.iter().map(|p| (p * self.efficiency).clamp(0.0, 1.0)).collect();
        let bins = self.bins[..ps.len()].to_vec();
        let counts: Vec<f64> = if self.cfg.poisson {
            let detector = DetectorConfig { dark_counts_per_bin: self.cfg.background, ..Default::default() };
            let mut g = rng::substream(self.seed, &setting_id);
            sample_counts(&ps, self.cfg.trials, self.cfg.mean_photon, &detector, &mut g)?
                .into_iter()
                .map(|n| n as f64)
                .collect()
        } else {
            let n = self.cfg.trials as f64;
            ps.iter().map(|p| n * (self.cfg.mean_photon * p + self.cfg.background)).collect()
        };
        let record = CountRecord::new(
            setting_id,
            bins,
            counts.iter().map(|c| c.round() as u64).collect(),
            self.cfg.trials,
            self.seed,
        )?;
        Ok((counts, record))
    }

    /// Direct time-resolved detection of a pole state.
    fn pole_fidelity(
        &self,
        id: String,
        qubit: &TimeBinState,
        early: bool,
        records: &mut Vec<CountRecord>,
    ) -> Result<f64> {
        let (counts, rec) = self.measure(id, &[qubit.alpha.norm_sqr(), qubit.beta.norm_sqr()])?;
        records.push(rec);
        let (right, wrong) = if early { (counts[0], counts[1]) } else { (counts[1], counts[0]) };
        Ok(signal_noise_fidelity(right - wrong, wrong))
    }

    /// Middle-bin fringe extremes at θ = φ and φ + π through the analyzer.
    fn fringe_fidelity(
        &self,
        id: String,
        qubit: &TimeBinState,
        analyzer: &AnalyzerConfig,
        records: &mut Vec<CountRecord>,
    ) -> Result<f64> {
        let phase = qubit.relative_phase();
        let at_max = analyzer_project(qubit, &analyzer.with_theta(phase))?;
        let at_min = analyzer_project(qubit, &analyzer.with_theta(phase + PI))?;
        let mean = 0.5 * (at_max[1] + at_min[1]);
        let swing = 0.5 * (at_max[1] - at_min[1]) * (-0.5 * self.cfg.phase_jitter * self.cfg.phase_jitter).exp();
        let mut extremes = [0.0; 2];
        for (k, (probs, sign, tag)) in [(at_max, 1.0, "max"), (at_min, -1.0, "min")].into_iter().enumerate() {
            let (counts, rec) = self.measure(format!("{id}/{tag}"), &[probs[0], mean + sign * swing, probs[2]])?;
            records.push(rec);
            extremes[k] = counts[1];
        }
        Ok(afc::fidelity_from_visibility(afc::visibility(extremes[0], extremes[1])))
    }
}

/// Simulates storage, recall, analysis and counting for every qubit.
pub fn run_schedule(
    s: &Schedule,
    array: &[ChannelConfig],
    analyzer: &AnalyzerConfig,
    cfg: &RunConfig,
    seed: u64,
) -> Result<RunReport> {
    if cfg.trials == 0 {
        return Err(Error::param("trials", "must be positive"));
    }
    if !(cfg.phase_jitter >= 0.0 && cfg.background >= 0.0 && cfg.electrical_field_fraction >= 0.0) {
        return Err(Error::param("run", "noise parameters must be non-negative"));
    }
    let channel = |idx: usize| {
        array.iter().find(|c| c.index == idx).ok_or_else(|| Error::Channel(format!("channel {idx} not in array")))
    };
    let first = channel(s.qubits.first().map(|q| q.channel).unwrap_or(0))?;
    let violations = validate_schedule(s, &first.comb);
    if !violations.is_empty() {
        return Err(Error::InvalidSchedule(violations.iter().map(|v| v.to_string()).collect()));
    }
    let sep = s.bin_separation;
    let mut reports = Vec::with_capacity(s.qubits.len());
    for q in &s.qubits {
        let ch = channel(q.channel)?;
        let w = s.write_of(q.id).expect("validated").time;
        let r = *s.read_of(q.id).expect("validated");
        let shift = |p: &StarkPulse| StarkPulse { start: p.start - w, ..*p };
        let own = ch.stark.with_pulses(s.electric_pulses[&q.channel].iter().map(shift).collect())?;
        let emission = emission_time(&ch.comb, &own)?;
        let storage = r.time - w;
        if emission.echo_time().is_none_or(|t| (t - storage).abs() > TIMING_TOL * storage) {
            return Err(Error::PulseTiming(format!("channel {} does not emit at {storage:e} s", q.channel)));
        }
        let neighbors: Vec<StarkControl> = s
            .electric_pulses
            .iter()
            .filter(|(c, _)| c.abs_diff(q.channel) == 1)
            .map(|(_, pulses)| StarkControl { pulses: pulses.iter().map(shift).collect(), ..ch.stark.clone() })
            .collect();
        let refs: Vec<&StarkControl> = neighbors.iter().collect();
        let xfactor = electrical_crosstalk_factor(&own, &refs, cfg.electrical_field_fraction, storage);
        let memory_efficiency = emission.efficiency() * xfactor * xfactor;
        let expected = afc_efficiency(&ch.comb, ch.comb.echo_time(r.echo_order)) * xfactor * xfactor;
        if (memory_efficiency - expected).abs() > 1e-9 {
            return Err(Error::Channel(format!(
                "channel {} efficiency {memory_efficiency} differs from the comb model {expected}",
                q.channel
            )));
        }
        let detection_efficiency = memory_efficiency * ch.path_efficiency;
        let detector = Detector {
            cfg,
            seed,
            efficiency: detection_efficiency,
            bins: (0..3).map(|k| TimeBin { start: r.time + (k as f64 - 0.5) * sep, width: sep }).collect(),
        };
        let mut records = Vec::new();
        let tag = |name: &str| format!("q{}/{name}", q.id);
        let f_early = detector.pole_fidelity(tag("early"), &TimeBinState::early(sep), true, &mut records)?;
        let f_late = detector.pole_fidelity(tag("late"), &TimeBinState::late(sep), false, &mut records)?;
        let f_plus_i =
            detector.fringe_fidelity(tag("plus_i"), &TimeBinState::equator(PI / 2.0, sep), analyzer, &mut records)?;
        let f_three_quarter = detector.fringe_fidelity(
            tag("three_quarter"),
            &TimeBinState::equator(0.75 * PI, sep),
            analyzer,
            &mut records,
        )?;
        let f_state = if q.state.alpha.norm_sqr() < 1e-12 || q.state.beta.norm_sqr() < 1e-12 {
            detector.pole_fidelity(tag("state"), &q.state, q.state.beta.norm_sqr() < 1e-12, &mut records)?
        } else {
            detector.fringe_fidelity(tag("state"), &q.state, analyzer, &mut records)?
        };
        let f_el = 0.5 * (f_early + f_late);
        let f_pm = 0.5 * (f_plus_i + f_three_quarter);
        reports.push(QubitReport {
            qubit: q.id,
            channel: q.channel,
            echo_order: r.echo_order,
            write_time: w,
            read_time: r.time,
            memory_efficiency,
            detection_efficiency,
            f_early,
            f_late,
            f_plus_i,
            f_three_quarter,
            f_el,
            f_pm,
            f_total: f_el / 3.0 + 2.0 * f_pm / 3.0,
            f_state,
            records,
        });
    }
    Ok(RunReport { order: s.order.clone(), seed, qubits: reports })
}

/// The three demonstration qubits on channels 5, 6 and 7.
pub fn demo_qubits() -> Vec<QubitSlot> {
    let sep = DEFAULT_BIN_SEPARATION;
    [(1, 5, -PI / 2.0), (2, 6, PI / 2.0), (3, 7, 0.75 * PI)]
        .into_iter()
        .map(|(id, channel, phase)| QubitSlot { id, channel, state: TimeBinState::equator(phase, sep) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::default_array;

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for (i, &x) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }

    fn setup() -> (Vec<ChannelConfig>, Vec<QubitSlot>, PlanConfig) {
        (default_array(raqm_comb()), demo_qubits(), PlanConfig::default())
    }

    /// Exhaustive search over echo orders: the smallest per-qubit sum of n
    /// among assignments that respect the order and rise time.
    fn exhaustive(s: &Schedule, cfg: &PlanConfig) -> Option<Vec<u32>> {
        let period = 1.0 / s.delta;
        let gap = s.bin_separation + 2.0 * s.pulse_fwhm + cfg.aod_rise_time;
        let k = s.order.len();
        let mut best: Option<Vec<u32>> = None;
        let total = (cfg.n_max - 1).pow(k as u32);
        for code in 0..total {
            let ns: Vec<u32> = (0..k).map(|i| 2 + (code / (cfg.n_max - 1).pow(i as u32)) % (cfg.n_max - 1)).collect();
            let times: Vec<f64> =
                s.order.iter().zip(&ns).map(|(id, n)| s.write_of(*id).unwrap().time + *n as f64 * period).collect();
            if times.windows(2).all(|t| t[1] - t[0] >= gap * (1.0 - 1e-9))
                && best.as_ref().is_none_or(|b| ns.iter().sum::<u32>() < b.iter().sum::<u32>())
            {
                best = Some(ns);
            }
        }
        best
    }

    #[test]
    fn calibrated_comb_hits_anchor_efficiencies() {
        let comb = raqm_comb();
        assert!((afc_efficiency(&comb, 10e-6) - 0.187).abs() < 1e-9);
        assert!((afc_efficiency(&comb, 25e-6) - 0.029).abs() < 1e-9);
    }

    #[test]
    fn all_permutations_feasible_and_clean() {
        let (array, qubits, cfg) = setup();
        for order in permutations(&[1, 2, 3]) {
            let s = build_schedule(&qubits, &order, &array, &cfg).unwrap();
            assert_eq!(s.read_order(), order);
            assert!(validate_schedule(&s, &array[0].comb).is_empty());
            for r in &s.reads {
                assert!(r.echo_order <= 5);
                assert!(r.time <= 25e-6 + 1e-12 + s.writes.last().unwrap().time);
                let w = s.write_of(r.qubit).unwrap();
                let k = (r.time - w.time) * s.delta;
                assert!((k - k.round()).abs() < 1e-9);
            }
            let oracle = exhaustive(&s, &cfg).unwrap();
            let chosen: Vec<u32> = order.iter().map(|id| s.read_of(*id).unwrap().echo_order).collect();
            assert_eq!(chosen.iter().sum::<u32>(), oracle.iter().sum::<u32>(), "{order:?}");
        }
    }

    #[test]
    fn build_errors() {
        let (array, qubits, cfg) = setup();
        assert!(matches!(build_schedule(&qubits, &[1, 2], &array, &cfg), Err(Error::InvalidParameter { .. })));
        let mut clash = qubits.clone();
        clash[1].channel = 5;
        assert!(matches!(build_schedule(&clash, &[1, 2, 3], &array, &cfg), Err(Error::Channel(_))));
        let tight = PlanConfig { n_max: 2, ..cfg.clone() };
        assert!(matches!(build_schedule(&qubits, &[3, 2, 1], &array, &tight), Err(Error::Infeasible(_))));
        let mut mixed = array.clone();
        mixed[5].comb.delta = 250e3;
        assert!(matches!(build_schedule(&qubits, &[1, 2, 3], &mixed, &cfg), Err(Error::Channel(_))));
    }

    #[test]
    fn validator_flags_moved_pulse_and_close_reads() {
        let (array, qubits, cfg) = setup();
        let mut s = build_schedule(&qubits, &[2, 1, 3], &array, &cfg).unwrap();
        let period = 1.0 / s.delta;
        s.electric_pulses.get_mut(&5).unwrap()[1].start += period;
        let v = validate_schedule(&s, &array[0].comb);
        assert!(v.iter().any(|v| v.rule == Rule::RecallWindow));

        let mut s = build_schedule(&qubits, &[1, 2, 3], &array, &cfg).unwrap();
        s.reads[1].time = s.reads[0].time + 1.0e-6;
        let v = validate_schedule(&s, &array[0].comb);
        assert!(v.iter().any(|v| v.rule == Rule::RiseTime));
    }

    #[test]
    fn noiseless_run_is_perfect() {
        let (array, qubits, cfg) = setup();
        let analyzer = AnalyzerConfig::balanced(DEFAULT_BIN_SEPARATION, 0.0);
        for order in permutations(&[1, 2, 3]) {
            let s = build_schedule(&qubits, &order, &array, &cfg).unwrap();
            let rep = run_schedule(&s, &array, &analyzer, &RunConfig::default(), 7).unwrap();
            for q in &rep.qubits {
                assert_eq!(q.f_total, 1.0);
                assert_eq!(q.f_state, 1.0);
                assert!((0.02..=0.19).contains(&q.memory_efficiency));
            }
        }
    }

    #[test]
    fn jitter_sets_visibility() {
        let (array, qubits, cfg) = setup();
        let analyzer = AnalyzerConfig::balanced(DEFAULT_BIN_SEPARATION, 0.0);
        let s = build_schedule(&qubits, &[2, 1, 3], &array, &cfg).unwrap();
        let run =
            RunConfig { phase_jitter: jitter_for_visibility(0.985).unwrap(), poisson: false, ..Default::default() };
        let rep = run_schedule(&s, &array, &analyzer, &run, 0).unwrap();
        for q in &rep.qubits {
            assert!((q.f_plus_i - 0.9925).abs() < 1e-12);
            assert!((q.f_total - (1.0 / 3.0 + 2.0 * 0.9925 / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_schedule_refused() {
        let (array, qubits, cfg) = setup();
        let mut s = build_schedule(&qubits, &[1, 2, 3], &array, &cfg).unwrap();
        s.electric_pulses.get_mut(&6).unwrap()[1].polarity = 1;
        let analyzer = AnalyzerConfig::balanced(DEFAULT_BIN_SEPARATION, 0.0);
        assert!(matches!(
            run_schedule(&s, &array, &analyzer, &RunConfig::default(), 0),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn timeline_is_sorted() {
        let (array, qubits, cfg) = setup();
        let s = build_schedule(&qubits, &[3, 1, 2], &array, &cfg).unwrap();
        let csv = s.timeline_csv();
        let times: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert!(times.windows(2).all(|t| t[0] <= t[1]));
        assert_eq!(times.len(), 3 + 3 + 12);
    }
}
