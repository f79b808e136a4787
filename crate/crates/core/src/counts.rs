//! Photon-count records and their Monte Carlo generation.
//!
//! Each trial sends a weak coherent pulse with Poisson(μ) photons; every
//! photon lands in bin b with probability p_b or is lost. Trials are
//! independent, so the aggregate photon number is Poisson(trials·μ) and its
//! split over bins is multinomial. Both are sampled exactly, which keeps the
//! cost independent of the trial count.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    pub start: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_id: String,
    pub time_bins: Vec<TimeBin>,
    pub counts: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
}

impl CountRecord {
    pub fn new(
        setting_id: impl Into<String>,
        time_bins: Vec<TimeBin>,
        counts: Vec<u64>,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        if time_bins.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: time_bins.len(), got: counts.len() });
        }
        Ok(CountRecord { setting_id: setting_id.into(), time_bins, counts, trials, seed })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_start,bin_width,counts` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_width,counts\n");
        for (bin, n) in self.time_bins.iter().zip(&self.counts) {
            let _ = writeln!(out, "{:e},{:e},{}", bin.start, bin.width, n);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    /// Every detected photon is counted.
    #[default]
    PhotonCounting,
    /// Threshold detector: at most one click per bin per trial.
    Click,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    #[serde(default)]
    pub model: DetectorModel,
    /// Mean dark counts per bin per trial.
    #[serde(default)]
    pub dark_counts_per_bin: f64,
}

/// Counts for one setting with an ideal photon-counting detector.
pub fn simulate_counts(
    setting_id: &str,
    time_bins: &[TimeBin],
    probabilities: &[f64],
    trials: u64,
    mean_photon: f64,
    seed: u64,
) -> Result<CountRecord> {
    let mut rng = rng::substream(seed, setting_id);
    let counts = sample_counts(probabilities, trials, mean_photon, &DetectorConfig::default(), &mut rng)?;
    CountRecord::new(setting_id, time_bins.to_vec(), counts, trials, seed)
}

/// Draws bin counts from a caller-provided generator.
pub fn sample_counts<R: Rng + ?Sized>(
    probabilities: &[f64],
    trials: u64,
    mean_photon: f64,
    detector: &DetectorConfig,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if trials == 0 {
        return Err(Error::param("trials", "must be positive"));
    }
    if !(mean_photon.is_finite() && mean_photon >= 0.0) {
        return Err(Error::param("mean_photon", "must be finite and non-negative"));
    }
    if !(detector.dark_counts_per_bin.is_finite() && detector.dark_counts_per_bin >= 0.0) {
        return Err(Error::param("dark_counts_per_bin", "must be finite and non-negative"));
    }
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::param("probabilities", "each must lie in [0, 1]"));
    }
    let mass: f64 = probabilities.iter().sum();
    if mass > 1.0 + 1e-9 {
        return Err(Error::param("probabilities", format!("sum {mass} exceeds 1")));
    }
    let n_trials = trials as f64;
    let mut counts = match detector.model {
        DetectorModel::PhotonCounting => {
            let mut remaining = poisson(n_trials * mean_photon, rng)?;
            let mut rest = 1.0_f64;
            let mut out = Vec::with_capacity(probabilities.len());
            for &p in probabilities {
                let k = if remaining == 0 || p <= 0.0 {
                    0
                } else if p >= rest {
                    remaining
                } else {
                    binomial(remaining, p / rest, rng)?
                };
                out.push(k);
                remaining -= k;
                rest -= p;
            }
            out
        }
        DetectorModel::Click => probabilities
            .iter()
            .map(|&p| {
                let click = -(-(mean_photon * p + detector.dark_counts_per_bin)).exp_m1();
                binomial(trials, click, rng)
            })
            .collect::<Result<Vec<u64>>>()?,
    };
    if detector.model == DetectorModel::PhotonCounting && detector.dark_counts_per_bin > 0.0 {
        for c in counts.iter_mut() {
            *c += poisson(n_trials * detector.dark_counts_per_bin, rng)?;
        }
    }
    Ok(counts)
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if lambda <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::param("mean_photon", e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    let dist = Binomial::new(n, p.clamp(0.0, 1.0)).map_err(|e| Error::param("probabilities", e.to_string()))?;
    Ok(dist.sample(rng))
}
