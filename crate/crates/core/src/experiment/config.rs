//! Experiment configuration file.
//!
//! The file is JSON. Every field has a default, so `{}` (or an empty file)
//! gives the mmWave reference setup. Powers are given in dBm and angles in
//! degrees here; [`ExperimentConfig::scenario`] and friends convert them to
//! the SI linear units used everywhere else.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::beamforming::ScaOptions;
use crate::channel::{ChannelGenConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::math::dbm_to_watts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub num_antennas: usize,
    pub bandwidth_hz: f64,
    pub carrier_frequency_hz: f64,
    pub coherence_time_s: f64,
    pub guard_time_s: f64,
    /// Optional explicit N_p; must equal `round(T_p / T_s)`.
    pub guard_length: Option<usize>,
    pub transmit_power_dbm: f64,
    pub noise_psd_dbm_per_hz: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            num_antennas: 64,
            bandwidth_hz: 100e6,
            carrier_frequency_hz: 28e9,
            coherence_time_s: 1e-3,
            guard_time_s: 2e-6,
            guard_length: None,
            transmit_power_dbm: 30.0,
            noise_psd_dbm_per_hz: -169.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub num_paths: usize,
    pub max_subpaths: usize,
    pub aod_min_deg: f64,
    pub aod_max_deg: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            num_paths: 5,
            max_subpaths: 3,
            aod_min_deg: -60.0,
            aod_max_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub direction_deg: f64,
    pub range_m: f64,
    pub rcs_m2: f64,
    pub radial_velocity_mps: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            direction_deg: 30.0,
            range_m: 200.0,
            rcs_m2: 1.0,
            radial_velocity_mps: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeampatternSection {
    /// Single-sub-path AoDs of the fixed channel.
    pub path_aods_deg: Vec<f64>,
    /// ISAC threshold as a fraction of γ_zf,max. Near 0.8 the path beams drop
    /// to the level of the first sidelobes of the target beam.
    pub gamma_th_fraction: f64,
    pub grid_step_deg: f64,
    /// Local maxima more than this far below the global maximum are ignored.
    pub peak_floor_db: f64,
}

impl Default for BeampatternSection {
    fn default() -> Self {
        BeampatternSection {
            path_aods_deg: vec![-60.0, -31.0, -24.0, 18.0, 54.0],
            gamma_th_fraction: 0.5,
            grid_step_deg: 0.5,
            peak_floor_db: 10.0,
        }
    }
}

/// `start:stop:step` in dB, inclusive of `stop` when it lies on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DbGrid {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "grid `{s}` is not of the form start:stop:step"
            )));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("grid `{s}`: `{p}` is not a number ({e})")))
        };
        let g = DbGrid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if self.step <= 0.0 || self.stop < self.start {
            return Err(Error::Config(
                "grid needs step > 0 and stop >= start".into(),
            ));
        }
        if (self.stop - self.start) / self.step > 1e5 {
            return Err(Error::Config("grid has more than 1e5 points".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeSweepSection {
    pub num_paths: Vec<usize>,
    pub gamma_th_db: DbGrid,
}

impl Default for SeSweepSection {
    fn default() -> Self {
        SeSweepSection {
            num_paths: vec![5, 10],
            gamma_th_db: DbGrid {
                start: 0.0,
                stop: 20.0,
                step: 2.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdMapSection {
    /// ISAC threshold as a fraction of γ_zf,max.
    pub gamma_th_fraction: f64,
    /// Doppler bins on each side of zero, spaced by 1/(N T_s).
    pub doppler_half_width: usize,
    /// Noise draws for the empirical peak-cell SNR.
    pub snr_trials: usize,
}

impl Default for DdMapSection {
    fn default() -> Self {
        DdMapSection {
            gamma_th_fraction: 0.8,
            doppler_half_width: 16,
            snr_trials: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmCompareSection {
    pub subcarriers: Vec<usize>,
    /// Target range for the empirical SNR runs; closer than the sensing
    /// target so low-SNR OFDM cells can be measured with few draws. The
    /// SNR ratios do not depend on it.
    pub empirical_range_m: f64,
    pub snr_trials: usize,
    /// Number of paired Doppler trials (K = smallest entry of `subcarriers`).
    pub doppler_trials: usize,
    /// Sensing SNR of the paired Doppler trial (dB).
    pub doppler_trial_snr_db: f64,
}

impl Default for OfdmCompareSection {
    fn default() -> Self {
        OfdmCompareSection {
            subcarriers: vec![64, 256, 1024],
            empirical_range_m: 20.0,
            snr_trials: 500,
            doppler_trials: 100,
            doppler_trial_snr_db: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Beampattern,
    SeSweep,
    DdMap,
    OfdmCompare,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Beampattern => "beampattern",
            Experiment::SeSweep => "se-sweep",
            Experiment::DdMap => "dd-map",
            Experiment::OfdmCompare => "ofdm-compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub scenario: ScenarioSection,
    pub channel: ChannelSection,
    pub target: TargetSection,
    pub beampattern: BeampatternSection,
    pub se_sweep: SeSweepSection,
    pub dd_map: DdMapSection,
    pub ofdm_compare: OfdmCompareSection,
    pub sca: ScaOptions,
    pub seed: u64,
    /// Monte-Carlo channel realizations.
    pub trials: usize,
    /// Cap on N for waveform-level Monte-Carlo runs.
    pub max_waveform_length: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            scenario: ScenarioSection::default(),
            channel: ChannelSection::default(),
            target: TargetSection::default(),
            beampattern: BeampatternSection::default(),
            se_sweep: SeSweepSection::default(),
            dd_map: DdMapSection::default(),
            ofdm_compare: OfdmCompareSection::default(),
            sca: ScaOptions::default(),
            seed: 0,
            trials: 100,
            max_waveform_length: 1 << 14,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config, treating an empty or whitespace-only document as `{}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim().is_empty() {
            ExperimentConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| {
                Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scenario in SI units: P and σ² = N_0 B in watts.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let s = &self.scenario;
        let cfg = ScenarioConfig::from_times(
            s.num_antennas,
            s.bandwidth_hz,
            s.carrier_frequency_hz,
            s.coherence_time_s,
            s.guard_time_s,
            dbm_to_watts(s.transmit_power_dbm),
            dbm_to_watts(s.noise_psd_dbm_per_hz) * s.bandwidth_hz,
        )
        .map_err(|e| Error::Config(format!("scenario: {e}")))?;
        if let Some(np) = s.guard_length {
            if np != cfg.guard_length {
                return Err(Error::Config(format!(
                    "scenario.guard_length = {np} is inconsistent with guard_time_s / T_s = {}",
                    cfg.guard_length
                )));
            }
        }
        Ok(cfg)
    }

    /// Same scenario with the block shortened so that `N ≤ max_waveform_length`.
    pub fn waveform_scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = self.scenario()?;
        let n = cfg.cpi_length().min(self.max_waveform_length);
        cfg.block_length = n + cfg.guard_length;
        cfg.coherence_time = cfg.block_length as f64 * cfg.symbol_duration();
        Ok(cfg)
    }

    pub fn channel_gen(&self, num_paths: usize) -> ChannelGenConfig {
        ChannelGenConfig {
            num_paths,
            max_subpaths: self.channel.max_subpaths,
            aod_min: self.channel.aod_min_deg.to_radians(),
            aod_max: self.channel.aod_max_deg.to_radians(),
            max_delay: None,
        }
    }

    pub fn target_direction(&self) -> f64 {
        self.target.direction_deg.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        let fail = |field: &str, why: &str| Err(Error::Config(format!("{field}: {why}")));
        if self.trials == 0 {
            return fail("trials", "must be at least 1");
        }
        if self.max_waveform_length == 0 {
            return fail("max_waveform_length", "must be at least 1");
        }
        if self.channel.num_paths == 0 {
            return fail("channel.num_paths", "must be at least 1");
        }
        if self.channel.max_subpaths == 0 {
            return fail("channel.max_subpaths", "must be at least 1");
        }
        if !(self.channel.aod_min_deg <= self.channel.aod_max_deg
            && self.channel.aod_min_deg >= -90.0
            && self.channel.aod_max_deg <= 90.0)
        {
            return fail(
                "channel.aod_min_deg/aod_max_deg",
                "need -90 <= min <= max <= 90",
            );
        }
        if !(-90.0..=90.0).contains(&self.target.direction_deg) {
            return fail("target.direction_deg", "must lie in [-90, 90]");
        }
        if !(self.target.range_m > 0.0 && self.target.rcs_m2 > 0.0) {
            return fail("target", "range_m and rcs_m2 must be positive");
        }
        if !self.target.radial_velocity_mps.is_finite() {
            return fail("target.radial_velocity_mps", "must be finite");
        }
        if self.beampattern.path_aods_deg.is_empty() {
            return fail("beampattern.path_aods_deg", "needs at least one direction");
        }
        if !(self.beampattern.grid_step_deg.is_finite() && self.beampattern.grid_step_deg > 0.0) {
            return fail("beampattern.grid_step_deg", "must be positive");
        }
        for (field, v) in [
            (
                "beampattern.gamma_th_fraction",
                self.beampattern.gamma_th_fraction,
            ),
            ("dd_map.gamma_th_fraction", self.dd_map.gamma_th_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(field, "must lie in [0, 1]");
            }
        }
        if self.se_sweep.num_paths.is_empty() || self.se_sweep.num_paths.contains(&0) {
            return fail("se_sweep.num_paths", "needs path counts >= 1");
        }
        self.se_sweep.gamma_th_db.validate()?;
        if self.dd_map.snr_trials < 2 || self.ofdm_compare.snr_trials < 2 {
            return fail("snr_trials", "must be at least 2");
        }
        if self.ofdm_compare.subcarriers.is_empty() || self.ofdm_compare.subcarriers.contains(&0) {
            return fail("ofdm_compare.subcarriers", "needs subcarrier counts >= 1");
        }
        if !(self.ofdm_compare.empirical_range_m.is_finite()
            && self.ofdm_compare.empirical_range_m > 0.0)
        {
            return fail("ofdm_compare.empirical_range_m", "must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with the output directory blanked,
    /// hex encoded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}
