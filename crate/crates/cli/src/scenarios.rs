//! Pipelines behind each subcommand. Every scenario takes fully resolved
//! parameters and returns its artifacts plus a summary for stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use qmem_core::afc::{fit_gamma_tilde, CombConfig};
use qmem_core::array::{common_controls, default_array, store_and_retrieve, CrosstalkModel, PathState};
use qmem_core::certify::{self, BoundParams};
use qmem_core::counts::{CountRecord, DetectorConfig};
use qmem_core::quantum::fidelity_pure;
use qmem_core::schedule::{self, jitter_for_visibility, PlanConfig, QubitSlot, RunConfig};
use qmem_core::tomography::{self, CountModel, MeasurementSet, MleOptions, QptOptions, StateNoise};
use qmem_core::{AnalyzerConfig, ChannelConfig, DensityMatrix, MatrixJson, ProcessMatrix};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::Artifacts;
use crate::states::{default_channels, parse_channel, parse_state};

pub const DEFAULT_TRIALS: u64 = 100_000;

/// Device comb with the decay fitted to the 1st/2nd echo efficiencies.
pub fn device_comb() -> CombConfig {
    let gamma = fit_gamma_tilde(0.5e-6, 0.392, 1.0e-6, 0.313).expect("reference efficiencies are valid");
    CombConfig::device(gamma)
}

/// Optional array file, otherwise the default array on `comb`.
fn load_array(path: &Option<PathBuf>, comb: CombConfig, art: &mut Artifacts) -> Result<Vec<ChannelConfig>, CliError> {
    match path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            art.record_input(p, &bytes);
            serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(default_array(comb)),
    }
}

/// One count value for a tomography setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_id: Option<String>,
    pub setting_id: String,
    pub counts: f64,
}

fn counts_csv(entries: &[CountEntry]) -> String {
    let mut out = String::from("input_id,setting_id,counts\n");
    for e in entries {
        let _ = writeln!(out, "{},{},{}", e.input_id.as_deref().unwrap_or(""), e.setting_id, e.counts);
    }
    out
}

fn records_csv(records: &[CountRecord]) -> String {
    let mut out = String::from("setting_id,bin_start,bin_width,counts\n");
    for r in records {
        for (bin, n) in r.time_bins.iter().zip(&r.counts) {
            let _ = writeln!(out, "{},{:e},{:e},{}", r.setting_id, bin.start, bin.width, n);
        }
    }
    out
}

fn count_model(trials: u64, mean_photon: f64, efficiency: f64, dark: f64, expected: bool) -> CountModel {
    CountModel {
        trials,
        mean_photon,
        efficiency,
        poisson: !expected,
        detector: DetectorConfig { dark_counts_per_bin: dark, ..Default::default() },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplexParams {
    pub state: String,
    pub channels: Option<Vec<usize>>,
    pub echo_order: u32,
    pub mean_photon: f64,
    pub neighbor_db: f64,
    pub far_db: f64,
    pub field_fraction: f64,
    pub array: Option<PathBuf>,
    pub expected: bool,
    pub restarts: usize,
}

impl Default for MultiplexParams {
    fn default() -> Self {
        MultiplexParams {
            state: "psi1".into(),
            channels: None,
            echo_order: 2,
            mean_photon: 0.38,
            neighbor_db: -40.0,
            far_db: -60.0,
            field_fraction: 0.05,
            array: None,
            expected: false,
            restarts: 5,
        }
    }
}

/// Stores a path superposition, simulates tomography counts on the output
/// and reconstructs it.
pub fn multiplex(p: &MultiplexParams, seed: u64, trials: u64) -> Result<(Artifacts, serde_json::Value), CliError> {
    let mut art = Artifacts::default();
    let terms = crate::states::parse_terms(&p.state)?;
    let channels = p.channels.clone().unwrap_or_else(|| {
        let mut chs: Vec<usize> = terms.iter().map(|(ch, _)| *ch).collect();
        chs.sort_unstable();
        chs
    });
    let input = parse_state(&p.state, &channels)?;
    let array = load_array(&p.array, device_comb(), &mut art)?;
    let xtalk = CrosstalkModel::uniform(p.neighbor_db, p.far_db, p.field_fraction);
    let path = PathState::new(channels.clone(), input.amplitudes().iter().copied().collect())?;
    let controls = common_controls(&array, &channels, p.echo_order)?;
    let out = store_and_retrieve(&path, &array, &xtalk, &controls)?;
    let storage_fidelity = fidelity_pure(&out.density, &input)?;

    let meas = MeasurementSet::standard(channels.len())?;
    let model = count_model(trials, p.mean_photon, out.total_efficiency, 0.0, p.expected);
    let counts = tomography::synthetic_state_counts(&out.density, &meas, &model, &StateNoise::default(), seed)?;
    let entries: Vec<CountEntry> = meas
        .labels()
        .iter()
        .zip(&counts)
        .map(|(l, n)| CountEntry { input_id: None, setting_id: l.clone(), counts: *n })
        .collect();
    let qst = tomography::qst_mle(&counts, &meas, &MleOptions { restarts: p.restarts, seed, ..Default::default() })?;
    let reconstructed_fidelity = fidelity_pure(&qst.rho, &input)?;

    #[derive(Serialize)]
    struct ChannelSummary {
        channel: usize,
        memory_efficiency: f64,
        crosstalk_factor: f64,
    }
    let summary = serde_json::json!({
        "scenario": "multiplex",
        "seed": seed,
        "trials": trials,
        "state": p.state,
        "channels": channels,
        "echo_time": out.echo_time,
        "memory_efficiency": out.memory_efficiency,
        "total_efficiency": out.total_efficiency,
        "storage_fidelity": storage_fidelity,
        "reconstructed_fidelity": reconstructed_fidelity,
        "per_channel": out.per_channel.iter().map(|r| ChannelSummary {
            channel: r.channel,
            memory_efficiency: r.memory_efficiency,
            crosstalk_factor: r.crosstalk_factor,
        }).collect::<Vec<_>>(),
    });
    art.add_json("storage.json", &summary)?;
    art.add_json("output_density.json", &out.density.to_json())?;
    art.add_json("counts.json", &entries)?;
    art.add_text("counts.csv", counts_csv(&entries));
    art.add_json("rho.json", &qst.rho.to_json())?;
    art.add_text("rho_elements.csv", tomography::element_csv(qst.rho.matrix()));
    Ok((art, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaqmParams {
    pub order: Vec<usize>,
    pub channels: Vec<usize>,
    pub delta: f64,
    pub rise: f64,
    pub n_max: u32,
    /// Target fringe visibility; sets the phase jitter when given.
    pub visibility: Option<f64>,
    pub jitter: f64,
    pub background: f64,
    pub mean_photon: f64,
    pub field_fraction: f64,
    pub expected: bool,
    pub array: Option<PathBuf>,
}

impl Default for RaqmParams {
    fn default() -> Self {
        RaqmParams {
            order: vec![2, 1, 3],
            channels: vec![5, 6, 7],
            delta: schedule::DEFAULT_DELTA,
            rise: schedule::DEFAULT_RISE_TIME,
            n_max: schedule::DEFAULT_N_MAX,
            visibility: None,
            jitter: 0.0,
            background: 0.0,
            mean_photon: 0.76,
            field_fraction: 0.0,
            expected: false,
            array: None,
        }
    }
}

/// Plans, validates and simulates a random-access read-out.
pub fn raqm(p: &RaqmParams, seed: u64, trials: u64) -> Result<(Artifacts, serde_json::Value), CliError> {
    let mut art = Artifacts::default();
    let base = schedule::raqm_comb();
    let comb = CombConfig { delta: p.delta, ..base };
    let array = load_array(&p.array, comb, &mut art)?;
    let demo = schedule::demo_qubits();
    if p.channels.len() != demo.len() {
        return Err(CliError::Config(format!("expected {} channels, got {:?}", demo.len(), p.channels)));
    }
    let qubits: Vec<QubitSlot> =
        demo.iter().zip(&p.channels).map(|(q, &channel)| QubitSlot { channel, ..*q }).collect();
    let plan = PlanConfig { aod_rise_time: p.rise, n_max: p.n_max, ..Default::default() };
    let sched = schedule::build_schedule(&qubits, &p.order, &array, &plan)?;
    let jitter = match p.visibility {
        Some(v) => jitter_for_visibility(v)?,
        None => p.jitter,
    };
    let run = RunConfig {
        trials,
        mean_photon: p.mean_photon,
        phase_jitter: jitter,
        background: p.background,
        poisson: !p.expected,
        electrical_field_fraction: p.field_fraction,
    };
    let analyzer = AnalyzerConfig::balanced(qubits[0].state.bin_separation, 0.0);
    let report = schedule::run_schedule(&sched, &array, &analyzer, &run, seed)?;
    let records: Vec<CountRecord> = report.qubits.iter().flat_map(|q| q.records.clone()).collect();

    let summary = serde_json::json!({
        "scenario": "raqm",
        "seed": seed,
        "trials": trials,
        "order": sched.order,
        "read_order": sched.read_order(),
        "phase_jitter": jitter,
        "qubits": report.qubits.iter().map(|q| serde_json::json!({
            "qubit": q.qubit,
            "channel": q.channel,
            "echo_order": q.echo_order,
            "read_time": q.read_time,
            "memory_efficiency": q.memory_efficiency,
            "f_total": q.f_total,
            "f_state": q.f_state,
        })).collect::<Vec<_>>(),
    });
    art.add_json("schedule.json", &sched)?;
    art.add_text("timeline.csv", sched.timeline_csv());
    art.add_text("fidelity.csv", report.fidelity_csv());
    art.add_json("report.json", &report)?;
    art.add_text("counts.csv", records_csv(&records));
    Ok((art, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QstParams {
    pub dim: usize,
    pub channels: Option<Vec<usize>>,
    pub state: String,
    /// Measured counts; synthetic counts from `state` otherwise.
    pub counts: Option<PathBuf>,
    pub mean_photon: f64,
    pub efficiency: f64,
    pub depolarizing: f64,
    pub jitter: f64,
    pub dark: f64,
    pub expected: bool,
    pub restarts: usize,
}

impl Default for QstParams {
    fn default() -> Self {
        QstParams {
            dim: 4,
            channels: None,
            state: "c5+c8".into(),
            counts: None,
            mean_photon: 0.38,
            efficiency: 0.3,
            depolarizing: 0.0,
            jitter: 0.0,
            dark: 0.0,
            expected: false,
            restarts: 5,
        }
    }
}

fn read_entries(path: &PathBuf, art: &mut Artifacts) -> Result<Vec<CountEntry>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    art.record_input(path, &bytes);
    serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn lookup(entries: &[CountEntry], input: Option<&str>, setting: &str) -> Result<f64, CliError> {
    entries
        .iter()
        .find(|e| e.setting_id == setting && e.input_id.as_deref() == input)
        .map(|e| e.counts)
        .ok_or_else(|| CliError::Config(format!("no counts for input {input:?}, setting {setting}")))
}

/// Maximum-likelihood state reconstruction.
pub fn qst(p: &QstParams, seed: u64, trials: u64) -> Result<(Artifacts, serde_json::Value), CliError> {
    let mut art = Artifacts::default();
    let channels = p.channels.clone().unwrap_or_else(|| default_channels(p.dim));
    if channels.len() != p.dim {
        return Err(CliError::Config(format!("{} channels for dimension {}", channels.len(), p.dim)));
    }
    let meas = MeasurementSet::standard(p.dim)?;
    let truth = match &p.counts {
        Some(_) => None,
        None => Some(parse_state(&p.state, &channels)?),
    };
    let counts: Vec<f64> = match (&p.counts, &truth) {
        (Some(path), _) => {
            let entries = read_entries(path, &mut art)?;
            meas.labels().iter().map(|l| lookup(&entries, None, l)).collect::<Result<_, _>>()?
        }
        (None, Some(psi)) => {
            let noise = StateNoise { depolarizing: p.depolarizing, phase_jitter: p.jitter };
            let model = count_model(trials, p.mean_photon, p.efficiency, p.dark, p.expected);
            tomography::synthetic_state_counts(&DensityMatrix::from_pure(psi), &meas, &model, &noise, seed)?
        }
        (None, None) => unreachable!("truth exists whenever counts are synthetic"),
    };
    let entries: Vec<CountEntry> = meas
        .labels()
        .iter()
        .zip(&counts)
        .map(|(l, n)| CountEntry { input_id: None, setting_id: l.clone(), counts: *n })
        .collect();
    let res = tomography::qst_mle(&counts, &meas, &MleOptions { restarts: p.restarts, seed, ..Default::default() })?;
    let fidelity = truth.as_ref().map(|psi| fidelity_pure(&res.rho, psi)).transpose()?;
    let summary = serde_json::json!({
        "scenario": "qst",
        "seed": seed,
        "trials": trials,
        "dim": p.dim,
        "channels": channels,
        "state": truth.as_ref().map(|_| p.state.clone()),
        "fidelity": fidelity,
        "purity": res.rho.purity(),
        "objective": res.objective,
        "count_scale": res.scale,
        "iterations": res.iterations,
        "converged": res.converged,
        "gradient_norm": res.gradient_norm,
    });
    if p.counts.is_none() {
        art.add_json("counts.json", &entries)?;
        art.add_text("counts.csv", counts_csv(&entries));
    }
    art.add_json("rho.json", &res.rho.to_json())?;
    art.add_text("rho_elements.csv", tomography::element_csv(res.rho.matrix()));
    art.add_json("report.json", &summary)?;
    Ok((art, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QptParams {
    pub dim: usize,
    pub channel: String,
    pub counts: Option<PathBuf>,
    pub mean_photon: f64,
    pub efficiency: f64,
    pub expected: bool,
    /// Absolute penalty weight; 10 × total counts when absent.
    pub penalty: Option<f64>,
    pub restarts: usize,
}

impl Default for QptParams {
    fn default() -> Self {
        QptParams {
            dim: 4,
            channel: "depolarizing:0.028".into(),
            counts: None,
            mean_photon: 0.38,
            efficiency: 0.3,
            expected: false,
            penalty: None,
            restarts: 2,
        }
    }
}

/// Process tomography from the standard input and measurement sets.
pub fn qpt(p: &QptParams, seed: u64, trials: u64) -> Result<(Artifacts, serde_json::Value), CliError> {
    let mut art = Artifacts::default();
    let sets = MeasurementSet::standard(p.dim)?;
    let truth = match &p.counts {
        Some(_) => None,
        None => Some(parse_channel(&p.channel, p.dim)?),
    };
    let counts: Vec<Vec<f64>> = match (&p.counts, &truth) {
        (Some(path), _) => {
            let entries = read_entries(path, &mut art)?;
            sets.labels()
                .iter()
                .map(|i| sets.labels().iter().map(|s| lookup(&entries, Some(i), s)).collect())
                .collect::<Result<_, _>>()?
        }
        (None, Some(chi)) => {
            let model = count_model(trials, p.mean_photon, p.efficiency, 0.0, p.expected);
            tomography::synthetic_process_counts(chi, &sets, &sets, &model, seed)?
        }
        (None, None) => unreachable!("truth exists whenever counts are synthetic"),
    };
    let opts = QptOptions { mle: MleOptions { restarts: p.restarts, seed, ..Default::default() }, penalty: p.penalty };
    let res = tomography::qpt_mle(&counts, &sets, &sets, &opts)?;
    let summary = serde_json::json!({
        "scenario": "qpt",
        "seed": seed,
        "trials": trials,
        "dim": p.dim,
        "channel": truth.as_ref().map(|_| p.channel.clone()),
        "true_chi00": truth.as_ref().map(ProcessMatrix::identity_fidelity),
        "chi00": res.chi.identity_fidelity(),
        "tp_residual": res.tp_residual,
        "objective": res.objective,
        "count_scale": res.scale,
        "iterations": res.iterations,
        "converged": res.converged,
    });
    if p.counts.is_none() {
        let entries: Vec<CountEntry> = sets
            .labels()
            .iter()
            .zip(&counts)
            .flat_map(|(i, row)| {
                sets.labels().iter().zip(row).map(move |(s, n)| CountEntry {
                    input_id: Some(i.clone()),
                    setting_id: s.clone(),
                    counts: *n,
                })
            })
            .collect();
        art.add_json("counts.json", &entries)?;
        art.add_text("counts.csv", counts_csv(&entries));
    }
    art.add_json("chi.json", &res.chi.to_json())?;
    art.add_text("chi_elements.csv", tomography::element_csv(res.chi.chi()));
    art.add_json("report.json", &summary)?;
    Ok((art, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsParams {
    pub d: usize,
    pub mu: f64,
    pub eta: f64,
    /// Mean photon numbers for the efficiency sweep.
    pub curve_mus: Vec<f64>,
    pub points: usize,
    pub dims: Vec<usize>,
}

impl Default for BoundsParams {
    fn default() -> Self {
        BoundsParams { d: 5, mu: 0.38, eta: 0.3, curve_mus: vec![0.38, 0.76], points: 100, dims: vec![2, 3, 4, 5] }
    }
}

/// Classical fidelity bound at one point plus sweeps over η_M and d.
pub fn bounds(p: &BoundsParams) -> Result<(Artifacts, serde_json::Value), CliError> {
    let mut art = Artifacts::default();
    let point = certify::classical_bound(&BoundParams { d: p.d, mu: p.mu, eta_m: p.eta })?;
    let unit = certify::classical_bound_unit_efficiency(p.d, p.mu)?;
    if p.points < 2 {
        return Err(CliError::Config("points must be at least 2".into()));
    }
    let etas: Vec<f64> = (1..=p.points).map(|k| k as f64 / p.points as f64).collect();
    let mut curve = String::from("eta_m");
    for mu in &p.curve_mus {
        let _ = write!(curve, ",mu_{mu}");
    }
    curve.push('\n');
    let columns: Vec<Vec<f64>> = p
        .curve_mus
        .iter()
        .map(|&mu| Ok(certify::bound_curve(p.d, mu, &etas)?.into_iter().map(|(_, b)| b.fidelity).collect()))
        .collect::<Result<_, CliError>>()?;
    for (k, eta) in etas.iter().enumerate() {
        let _ = write!(curve, "{eta}");
        for col in &columns {
            let _ = write!(curve, ",{:.12}", col[k]);
        }
        curve.push('\n');
    }
    let mut dims = String::from("d,fidelity\n");
    for &d in &p.dims {
        let b = certify::classical_bound(&BoundParams { d, mu: p.mu, eta_m: p.eta })?;
        let _ = writeln!(dims, "{d},{:.12}", b.fidelity);
    }
    let summary = serde_json::json!({
        "scenario": "bounds",
        "d": p.d,
        "mu": p.mu,
        "eta_m": p.eta,
        "fidelity": point.fidelity,
        "n_min": point.n_min,
        "gamma": point.gamma,
        "unit_efficiency_fidelity": unit,
    });
    art.add_json("bound.json", &summary)?;
    art.add_text("bound_curve.csv", curve);
    art.add_text("bound_dims.csv", dims);
    Ok((art, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityParams {
    /// χ JSON written by `qpt`; a named channel otherwise.
    pub chi: Option<PathBuf>,
    pub channel: String,
    pub dim: usize,
    pub k: Option<usize>,
    pub restarts: usize,
}

impl Default for CapacityParams {
    fn default() -> Self {
        CapacityParams { chi: None, channel: "depolarizing:0.028".into(), dim: 4, k: None, restarts: 2 }
    }
}

/// Capacity lower bounds and the Schmidt-number certificate.
pub fn capacity(p: &CapacityParams, seed: u64) -> Result<(Artifacts, serde_json::Value), CliError> {
    let mut art = Artifacts::default();
    let chi = match &p.chi {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
            art.record_input(path, &bytes);
            let json: MatrixJson =
                serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ProcessMatrix::from_json(&json)?
        }
        None => parse_channel(&p.channel, p.dim)?,
    };
    let d = chi.dim();
    let c1 = certify::c1_lower_bound(&chi, p.k.unwrap_or(d), p.restarts, seed)?;
    let q1 = certify::q1_lower_bound(&chi, p.restarts, seed)?;
    let schmidt = certify::schmidt_certificate(&chi)?;
    let summary = serde_json::json!({
        "scenario": "capacity",
        "seed": seed,
        "dim": d,
        "chi00": chi.identity_fidelity(),
        "c1": c1.c1,
        "c1_converged": c1.converged,
        "c1_probabilities": c1.probabilities,
        "q1": q1.q1,
        "q1_raw": q1.raw,
        "q1_converged": q1.converged,
        "entangled_fidelity": schmidt.fidelity,
        "schmidt_number": schmidt.schmidt_number,
    });
    art.add_json("capacity.json", &summary)?;
    Ok((art, summary))
}

/// Parameters of every scenario, as stored in a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sections {
    pub multiplex: MultiplexParams,
    pub raqm: RaqmParams,
    pub qst: QstParams,
    pub qpt: QptParams,
    pub bounds: BoundsParams,
    pub capacity: CapacityParams,
}

/// Scenario names accepted in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Multiplex,
    Raqm,
    Qst,
    Qpt,
    Bounds,
    Capacity,
}

impl Scenario {
    pub const ALL: [Scenario; 6] =
        [Scenario::Multiplex, Scenario::Raqm, Scenario::Qst, Scenario::Qpt, Scenario::Bounds, Scenario::Capacity];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Multiplex => "multiplex",
            Scenario::Raqm => "raqm",
            Scenario::Qst => "qst",
            Scenario::Qpt => "qpt",
            Scenario::Bounds => "bounds",
            Scenario::Capacity => "capacity",
        }
    }
}

/// Runs one scenario; returns artifacts, summary and the serialized
/// resolved parameters.
pub fn run(
    scenario: Scenario,
    sections: &Sections,
    seed: u64,
    trials: u64,
) -> Result<(Artifacts, serde_json::Value, Vec<u8>), CliError> {
    let to_value = |v: Result<serde_json::Value, serde_json::Error>| v.map_err(|e| CliError::Io(e.to_string()));
    let (art, summary, resolved) = match scenario {
        Scenario::Multiplex => {
            let (a, s) = multiplex(&sections.multiplex, seed, trials)?;
            (a, s, to_value(serde_json::to_value(&sections.multiplex))?)
        }
        Scenario::Raqm => {
            let (a, s) = raqm(&sections.raqm, seed, trials)?;
            (a, s, to_value(serde_json::to_value(&sections.raqm))?)
        }
        Scenario::Qst => {
            let (a, s) = qst(&sections.qst, seed, trials)?;
            (a, s, to_value(serde_json::to_value(&sections.qst))?)
        }
        Scenario::Qpt => {
            let (a, s) = qpt(&sections.qpt, seed, trials)?;
            (a, s, to_value(serde_json::to_value(&sections.qpt))?)
        }
        Scenario::Bounds => {
            let (a, s) = bounds(&sections.bounds)?;
            (a, s, to_value(serde_json::to_value(&sections.bounds))?)
        }
        Scenario::Capacity => {
            let (a, s) = capacity(&sections.capacity, seed)?;
            (a, s, to_value(serde_json::to_value(&sections.capacity))?)
        }
    };
    let params = crate::output::to_json(&serde_json::json!({
        "scenario": scenario.name(),
        "seed": seed,
        "trials": trials,
        "parameters": resolved,
    }))?;
    Ok((art, summary, params))
}
