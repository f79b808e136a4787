//! Argument parsing and dispatch shared by the `qmem`, `raqm` and `certify`
//! binaries. Precedence: command-line flags, then the config file, then
//! built-in defaults.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{check_inputs, ExperimentConfig, DEFAULT_SEED};
use crate::error::{CliError, EXIT_CONFIG, EXIT_OK};
use crate::output;
use crate::scenarios::{self, Scenario, Sections, DEFAULT_TRIALS};

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Trials per measurement setting.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,
}

/// Path-qudit storage followed by tomography of the output.
#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// State expression, e.g. psi1, c5+ic8.
    #[arg(long)]
    pub state: Option<String>,
    /// Comma-separated channel list spanning the state.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    #[arg(long)]
    pub echo_order: Option<u32>,
    #[arg(long)]
    pub mean_photon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub neighbor_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub far_db: Option<f64>,
    #[arg(long)]
    pub field_fraction: Option<f64>,
    /// Expected counts instead of Poisson samples.
    #[arg(long)]
    pub expected: bool,
}

/// Random-access read-out planning and simulation.
#[derive(Debug, Clone, Default, Args)]
pub struct PlanArgs {
    /// Read-out order of qubit ids, e.g. 2,1,3.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    /// Comb period, Hz.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Deflector rise time, s.
    #[arg(long)]
    pub rise: Option<f64>,
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Target fringe visibility.
    #[arg(long)]
    pub visibility: Option<f64>,
    /// Background counts per bin per trial.
    #[arg(long)]
    pub background: Option<f64>,
    #[arg(long)]
    pub mean_photon: Option<f64>,
    #[arg(long)]
    pub expected: bool,
}

/// State tomography.
#[derive(Debug, Clone, Default, Args)]
pub struct TomoArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub state: Option<String>,
    /// Measured counts JSON: [{"setting_id", "counts"}].
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub mean_photon: Option<f64>,
    #[arg(long)]
    pub efficiency: Option<f64>,
    #[arg(long)]
    pub depolarizing: Option<f64>,
    /// Phase-noise standard deviation, rad.
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub expected: bool,
}

/// Process tomography.
#[derive(Debug, Clone, Default, Args)]
pub struct QptArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    /// identity, depolarizing:p or dephasing:p.
    #[arg(long)]
    pub channel: Option<String>,
    /// Measured counts JSON: [{"input_id", "setting_id", "counts"}].
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub expected: bool,
}

/// Classical fidelity bound.
#[derive(Debug, Clone, Default, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Mean photon numbers for the efficiency sweep.
    #[arg(long, value_delimiter = ',')]
    pub curve_mus: Option<Vec<f64>>,
    #[arg(long)]
    pub points: Option<usize>,
}

/// Capacity lower bounds and Schmidt certificate.
#[derive(Debug, Clone, Default, Args)]
pub struct CapacityArgs {
    /// χ JSON as written by `qpt`.
    #[arg(long)]
    pub chi: Option<PathBuf>,
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of input states for the classical capacity search.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    Simulate(SimulateArgs),
    Plan(PlanArgs),
    Tomo(TomoArgs),
    Qpt(QptArgs),
    Bound(BoundArgs),
    Capacity(CapacityArgs),
    /// Runs the config's scenario, or every scenario into subdirectories.
    Demo,
}

#[derive(Debug, Parser)]
#[command(name = "qmem", version, about = "Multichannel AFC memory simulation, tomography and certification")]
pub struct QmemCli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum RaqmCommand {
    Plan(PlanArgs),
}

#[derive(Debug, Parser)]
#[command(name = "raqm", version, about = "Random-access read-out planning")]
pub struct RaqmCli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: RaqmCommand,
}

#[derive(Debug, Clone, Subcommand)]
pub enum CertifyCommand {
    Bound(BoundArgs),
    Capacity(CapacityArgs),
}

#[derive(Debug, Parser)]
#[command(name = "certify", version, about = "Classical bounds and capacity certificates")]
pub struct CertifyCli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: CertifyCommand,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply(command: &Command, s: &mut Sections) -> Option<Scenario> {
    match command {
        Command::Simulate(a) => {
            let m = &mut s.multiplex;
            set(&mut m.state, a.state.clone());
            if a.channels.is_some() {
                m.channels = a.channels.clone();
            }
            set(&mut m.echo_order, a.echo_order);
            set(&mut m.mean_photon, a.mean_photon);
            set(&mut m.neighbor_db, a.neighbor_db);
            set(&mut m.far_db, a.far_db);
            set(&mut m.field_fraction, a.field_fraction);
            m.expected |= a.expected;
            Some(Scenario::Multiplex)
        }
        Command::Plan(a) => {
            let r = &mut s.raqm;
            set(&mut r.order, a.order.clone());
            set(&mut r.channels, a.channels.clone());
            set(&mut r.delta, a.delta);
            set(&mut r.rise, a.rise);
            set(&mut r.n_max, a.n_max);
            if a.visibility.is_some() {
                r.visibility = a.visibility;
            }
            set(&mut r.background, a.background);
            set(&mut r.mean_photon, a.mean_photon);
            r.expected |= a.expected;
            Some(Scenario::Raqm)
        }
        Command::Tomo(a) => {
            let q = &mut s.qst;
            set(&mut q.dim, a.dim);
            set(&mut q.state, a.state.clone());
            if a.counts.is_some() {
                q.counts = a.counts.clone();
            }
            set(&mut q.mean_photon, a.mean_photon);
            set(&mut q.efficiency, a.efficiency);
            set(&mut q.depolarizing, a.depolarizing);
            set(&mut q.jitter, a.jitter);
            set(&mut q.restarts, a.restarts);
            q.expected |= a.expected;
            Some(Scenario::Qst)
        }
        Command::Qpt(a) => {
            let q = &mut s.qpt;
            set(&mut q.dim, a.dim);
            set(&mut q.channel, a.channel.clone());
            if a.counts.is_some() {
                q.counts = a.counts.clone();
            }
            if a.penalty.is_some() {
                q.penalty = a.penalty;
            }
            set(&mut q.restarts, a.restarts);
            q.expected |= a.expected;
            Some(Scenario::Qpt)
        }
        Command::Bound(a) => {
            let b = &mut s.bounds;
            set(&mut b.d, a.d);
            set(&mut b.mu, a.mu);
            set(&mut b.eta, a.eta);
            set(&mut b.curve_mus, a.curve_mus.clone());
            set(&mut b.points, a.points);
            Some(Scenario::Bounds)
        }
        Command::Capacity(a) => {
            let c = &mut s.capacity;
            if a.chi.is_some() {
                c.chi = a.chi.clone();
            }
            set(&mut c.channel, a.channel.clone());
            set(&mut c.dim, a.dim);
            if a.k.is_some() {
                c.k = a.k;
            }
            set(&mut c.restarts, a.restarts);
            Some(Scenario::Capacity)
        }
        Command::Demo => None,
    }
}

fn run_one(
    scenario: Scenario,
    sections: &Sections,
    seed: u64,
    trials: u64,
    dir: &Path,
) -> Result<serde_json::Value, CliError> {
    check_inputs(sections, scenario)?;
    let (art, mut summary, params) = scenarios::run(scenario, sections, seed, trials)?;
    output::commit(dir, scenario.name(), seed, trials, &params, art)?;
    if let Some(obj) = summary.as_object_mut() {
        obj.insert("out".into(), serde_json::Value::String(dir.display().to_string()));
    }
    Ok(summary)
}

/// Runs a parsed command and returns the summary printed on stdout.
pub fn execute(global: &GlobalArgs, command: &Command) -> Result<serde_json::Value, CliError> {
    let cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?.0,
        None => ExperimentConfig::default(),
    };
    let mut sections = cfg.resolved_sections();
    let seed = global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let trials = global.trials.or(cfg.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }
    let out = global.out.clone().or(cfg.out.clone());
    match apply(command, &mut sections).or(cfg.scenario) {
        Some(scenario) => {
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
            run_one(scenario, &sections, seed, trials, &dir)
        }
        None => {
            let root = out.unwrap_or_else(|| PathBuf::from("out"));
            let mut all = serde_json::Map::new();
            for scenario in Scenario::ALL {
                let summary = run_one(scenario, &sections, seed, trials, &root.join(scenario.name()))?;
                all.insert(scenario.name().into(), summary);
            }
            Ok(serde_json::Value::Object(all))
        }
    }
}

fn finish(result: Result<serde_json::Value, CliError>) -> i32 {
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn parse<P: Parser, I, T>(args: I) -> Result<P, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    P::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        if code == EXIT_OK {
            let _ = e.print();
        } else {
            eprintln!("{}", CliError::Config(e.kind().to_string()).to_json());
            let _ = e.print();
        }
        code
    })
}

/// Entry point of `qmem`; returns the process exit code.
pub fn qmem_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse::<QmemCli, _, _>(args) {
        Ok(cli) => finish(execute(&cli.global, &cli.command)),
        Err(code) => code,
    }
}

/// Entry point of `raqm`.
pub fn raqm_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse::<RaqmCli, _, _>(args) {
        Ok(cli) => {
            let RaqmCommand::Plan(a) = cli.command;
            finish(execute(&cli.global, &Command::Plan(a)))
        }
        Err(code) => code,
    }
}

/// Entry point of `certify`.
pub fn certify_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse::<CertifyCli, _, _>(args) {
        Ok(cli) => {
            let command = match cli.command {
                CertifyCommand::Bound(a) => Command::Bound(a),
                CertifyCommand::Capacity(a) => Command::Capacity(a),
            };
            finish(execute(&cli.global, &command))
        }
        Err(code) => code,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_sections() {
        let cli =
            QmemCli::try_parse_from(["qmem", "plan", "--order", "3,1,2", "--rise", "1e-6", "--seed", "9"]).unwrap();
        let mut s = Sections::default();
        assert_eq!(apply(&cli.command, &mut s), Some(Scenario::Raqm));
        assert_eq!(s.raqm.order, vec![3, 1, 2]);
        assert_eq!(s.raqm.rise, 1e-6);
        assert_eq!(cli.global.seed, Some(9));
    }

    #[test]
    fn negative_decibels_parse() {
        let cli = QmemCli::try_parse_from(["qmem", "simulate", "--neighbor-db", "-30"]).unwrap();
        let mut s = Sections::default();
        apply(&cli.command, &mut s);
        assert_eq!(s.multiplex.neighbor_db, -30.0);
    }

    #[test]
    fn usage_errors_map_to_config_exit() {
        assert_eq!(qmem_main(["qmem", "bound", "--d", "x"]), EXIT_CONFIG);
        assert_eq!(raqm_main(["raqm", "tomo"]), EXIT_CONFIG);
    }
}
