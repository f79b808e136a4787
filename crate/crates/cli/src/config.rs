//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::scenarios::{Scenario, Sections};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    /// Channel-array JSON shared by the multiplex and raqm scenarios.
    pub array: Option<PathBuf>,
    /// Absent scenario sections take their defaults.
    pub multiplex: Option<crate::scenarios::MultiplexParams>,
    pub raqm: Option<crate::scenarios::RaqmParams>,
    pub qst: Option<crate::scenarios::QstParams>,
    pub qpt: Option<crate::scenarios::QptParams>,
    pub bounds: Option<crate::scenarios::BoundsParams>,
    pub capacity: Option<crate::scenarios::CapacityParams>,
}

impl ExperimentConfig {
    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok((cfg, bytes))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        fix(&mut self.array);
        if let Some(m) = self.multiplex.as_mut() {
            fix(&mut m.array);
        }
        if let Some(r) = self.raqm.as_mut() {
            fix(&mut r.array);
        }
        if let Some(q) = self.qst.as_mut() {
            fix(&mut q.counts);
        }
        if let Some(q) = self.qpt.as_mut() {
            fix(&mut q.counts);
        }
        if let Some(c) = self.capacity.as_mut() {
            fix(&mut c.chi);
        }
    }

    /// Sections with defaults filled in and the shared array applied.
    pub fn resolved_sections(&self) -> Sections {
        let mut out = Sections {
            multiplex: self.multiplex.clone().unwrap_or_default(),
            raqm: self.raqm.clone().unwrap_or_default(),
            qst: self.qst.clone().unwrap_or_default(),
            qpt: self.qpt.clone().unwrap_or_default(),
            bounds: self.bounds.clone().unwrap_or_default(),
            capacity: self.capacity.clone().unwrap_or_default(),
        };
        if out.multiplex.array.is_none() {
            out.multiplex.array = self.array.clone();
        }
        if out.raqm.array.is_none() {
            out.raqm.array = self.array.clone();
        }
        out
    }
}

/// Every referenced input file must exist before anything runs.
pub fn check_inputs(sections: &Sections, scenario: Scenario) -> Result<(), CliError> {
    let path = match scenario {
        Scenario::Multiplex => &sections.multiplex.array,
        Scenario::Raqm => &sections.raqm.array,
        Scenario::Qst => &sections.qst.counts,
        Scenario::Qpt => &sections.qpt.counts,
        Scenario::Bounds => &None,
        Scenario::Capacity => &sections.capacity.chi,
    };
    match path {
        Some(p) if !p.is_file() => Err(CliError::Config(format!("input file {} does not exist", p.display()))),
        _ => Ok(()),
    }
}
