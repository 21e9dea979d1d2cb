//! Batch experiment drivers behind the `damisac` binary.
//!
//! Every driver is deterministic given the config and seed: each Monte-Carlo
//! trial draws from its own ChaCha stream and results are aggregated in trial
//! order, so parallel evaluation does not change the output.

mod beampattern;
mod config;
mod dd_map;
mod ofdm_compare;
mod se_sweep;

pub use beampattern::{find_peaks, run_beampattern, BeampatternResult};
pub use config::{
    load_config, BeampatternSection, ChannelSection, DbGrid, DdMapSection, Experiment,
    ExperimentConfig, OfdmCompareSection, ScenarioSection, SeSweepSection, TargetSection,
};
pub use dd_map::{run_dd_map, DdMapReport};
pub use ofdm_compare::{
    empirical_peak_power_ratio, paired_doppler_trial, papr_comparison, run_ofdm_compare,
    ComparisonRow, DopplerTrialOutcome, EmpiricalRatio, OfdmCompareResult, PaprRow,
};
pub use se_sweep::{run_se_sweep, SeRow, SeSweepResult};

use num_complex::Complex64;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::beamforming::IsacSolution;
use crate::channel::{radar_round_trip_gain, ScenarioConfig};
use crate::error::{Error, Result};
use crate::sensing::SensingBudget;

/// RNG stream families, one per experiment, so trials never share draws.
pub(crate) mod streams {
    pub const SE_SWEEP: u64 = 1 << 40;
    pub const DD_MAP: u64 = 2 << 40;
    pub const OFDM: u64 = 3 << 40;
}

/// Relative tolerance of the per-solution constraint audit.
pub(crate) const AUDIT_TOL: f64 = 1e-6;

/// Rejects a solution whose recomputed constraints miss the tolerance.
pub(crate) fn check_audit(sol: &IsacSolution) -> Result<()> {
    if sol.report.audit.is_feasible(AUDIT_TOL) {
        Ok(())
    } else {
        Err(Error::Degenerate(format!(
            "solution fails its constraint audit: {:?}",
            sol.report.audit
        )))
    }
}

/// `|α|` of the configured target (zero phase; SNRs only use `|α|²`).
pub(crate) fn target_alpha(cfg: &ExperimentConfig, scenario: &ScenarioConfig) -> Result<Complex64> {
    let power =
        radar_round_trip_gain(cfg.target.range_m, scenario.wavelength(), cfg.target.rcs_m2)?;
    Ok(Complex64::new(power.sqrt(), 0.0))
}

pub(crate) fn budget(cfg: &ExperimentConfig, scenario: &ScenarioConfig) -> Result<SensingBudget> {
    Ok(SensingBudget::new(
        target_alpha(cfg, scenario)?,
        scenario.cpi_length(),
        scenario.noise_power,
    ))
}

/// Opens `dir/name` and writes the `#` header: experiment, config hash,
/// seed and block accounting.
pub(crate) fn open_output(
    dir: &Path,
    name: &str,
    cfg: &ExperimentConfig,
    experiment: Experiment,
    scenario: &ScenarioConfig,
) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "# damisac {}", experiment.name())?;
    writeln!(w, "# config_sha256 = {}", cfg.hash())?;
    writeln!(w, "# seed = {}", cfg.seed)?;
    writeln!(
        w,
        "# N_c = {}, N_p = {}, N = {}",
        scenario.block_length,
        scenario.guard_length,
        scenario.cpi_length()
    )?;
    Ok((path, w))
}

pub(crate) fn db(x: f64) -> f64 {
    if x.is_nan() {
        f64::NAN
    } else if x > 0.0 {
        crate::math::linear_to_db(x)
    } else {
        -300.0
    }
}
