//! Transmit beampatterns of the communication-only, sensing-only and ISAC
//! beamformers on a fixed channel of single-sub-path directions.

use std::path::{Path, PathBuf};

use super::config::{Experiment, ExperimentConfig};
use super::{budget, check_audit, db, open_output};
use crate::beamforming::{
    isi_zf_mrt_beamformer, sca_optimize, sensing_only_zf_beamformer, SolveStatus,
};
use crate::channel::{ula_response, MultipathChannel, HALF_WAVELENGTH};
use crate::error::{Error, Result};
use crate::math::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BeampatternResult {
    pub angles_deg: Vec<f64>,
    /// `Σ_l |f_l^H a(θ_t)|²` in dB for each scheme.
    pub comm_db: Vec<f64>,
    pub sensing_db: Vec<f64>,
    pub isac_db: Vec<f64>,
    /// `|f_1^H a(θ_t)|²` of the ISAC beamformer in dB.
    pub isac_path1_db: Vec<f64>,
    pub comm_peaks_deg: Vec<f64>,
    pub sensing_peaks_deg: Vec<f64>,
    pub isac_peaks_deg: Vec<f64>,
    pub gamma_th: f64,
    pub gamma_zf_max: f64,
    pub isac_comm_snr: f64,
    pub isac_sensing_snr: f64,
}

/// Local maxima (strictly above the left neighbour, at least the right one)
/// no more than `floor_db` below the global maximum.
pub fn find_peaks(values_db: &[f64], floor_db: f64) -> Vec<usize> {
    let Some(max) = values_db.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let n = values_db.len();
    (0..n)
        .filter(|&i| {
            let v = values_db[i];
            let left = if i == 0 {
                f64::NEG_INFINITY
            } else {
                values_db[i - 1]
            };
            let right = if i + 1 == n {
                f64::NEG_INFINITY
            } else {
                values_db[i + 1]
            };
            v > left && v >= right && v >= max - floor_db
        })
        .collect()
}

fn pattern(beams: &CMatrix, angles: &[f64], column: Option<usize>) -> Vec<f64> {
    let m = beams.nrows();
    angles
        .iter()
        .map(|&deg| {
            let a = ula_response(deg.to_radians(), m, HALF_WAVELENGTH);
            let g: f64 = match column {
                Some(l) => a.dotc(&beams.column(l)).norm_sqr(),
                None => (beams.adjoint() * &a).norm_squared(),
            };
            db(g)
        })
        .collect()
}

pub fn run_beampattern(cfg: &ExperimentConfig) -> Result<BeampatternResult> {
    let scenario = cfg.scenario()?;
    let bp = &cfg.beampattern;
    let l = bp.path_aods_deg.len();
    let aods: Vec<f64> = bp.path_aods_deg.iter().map(|d| d.to_radians()).collect();
    // Distinct delays spread over the guard; only their distinctness matters here.
    let delays: Vec<usize> = (0..l)
        .map(|i| i * scenario.guard_length / l.max(1))
        .collect();
    let ch = MultipathChannel::from_directions(scenario.num_antennas, &aods, &delays)?;
    let theta = cfg.target_direction();
    let b = budget(cfg, &scenario)?;
    let p = scenario.transmit_power;

    let comm = isi_zf_mrt_beamformer(&ch, p)?;
    let sens = sensing_only_zf_beamformer(&ch, theta, p, &b)?;
    let gamma_th = bp.gamma_th_fraction * sens.gamma_zf_max;
    let isac = sca_optimize(&ch, theta, &b, gamma_th, p, &cfg.sca)?;
    if isac.status == SolveStatus::Infeasible {
        return Err(Error::SensingInfeasible {
            required: gamma_th,
            achievable: sens.gamma_zf_max,
        });
    }

    check_audit(&isac)?;
    let n = ((180.0 / bp.grid_step_deg) + 1e-9).floor() as usize;
    let angles: Vec<f64> = (0..=n)
        .map(|i| -90.0 + i as f64 * bp.grid_step_deg)
        .collect();
    let comm_db = pattern(comm.beams(), &angles, None);
    let sensing_db = pattern(sens.beamformer.beams(), &angles, None);
    let isac_db = pattern(isac.beamformer.beams(), &angles, None);
    let isac_path1_db = pattern(isac.beamformer.beams(), &angles, Some(0));
    let peaks = |v: &[f64]| {
        find_peaks(v, bp.peak_floor_db)
            .into_iter()
            .map(|i| angles[i])
            .collect()
    };
    Ok(BeampatternResult {
        comm_peaks_deg: peaks(&comm_db),
        sensing_peaks_deg: peaks(&sensing_db),
        isac_peaks_deg: peaks(&isac_db),
        angles_deg: angles,
        comm_db,
        sensing_db,
        isac_db,
        isac_path1_db,
        gamma_th,
        gamma_zf_max: sens.gamma_zf_max,
        isac_comm_snr: isac.comm_snr,
        isac_sensing_snr: isac.sensing_snr,
    })
}

impl BeampatternResult {
    /// `beampattern.csv` (one row per angle) and `beampattern_peaks.csv`.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        let scenario = cfg.scenario()?;
        let (path, mut file) = open_output(
            dir,
            "beampattern.csv",
            cfg,
            Experiment::Beampattern,
            &scenario,
        )?;
        {
            use std::io::Write;
            writeln!(
                file,
                "# gamma_th_db = {:.4}, gamma_zf_max_db = {:.4}, isac_comm_snr_db = {:.4}, isac_sensing_snr_db = {:.4}",
                db(self.gamma_th),
                db(self.gamma_zf_max),
                db(self.isac_comm_snr),
                db(self.isac_sensing_snr)
            )?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "angle_deg",
            "comm_only_db",
            "sensing_only_db",
            "isac_db",
            "isac_f1_db",
        ])?;
        for i in 0..self.angles_deg.len() {
            w.write_record(&[
                format!("{:.2}", self.angles_deg[i]),
                format!("{:.6}", self.comm_db[i]),
                format!("{:.6}", self.sensing_db[i]),
                format!("{:.6}", self.isac_db[i]),
                format!("{:.6}", self.isac_path1_db[i]),
            ])?;
        }
        w.flush()?;

        let (peaks_path, file) = open_output(
            dir,
            "beampattern_peaks.csv",
            cfg,
            Experiment::Beampattern,
            &scenario,
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["scheme", "peak_deg"])?;
        for (scheme, peaks) in [
            ("comm-only", &self.comm_peaks_deg),
            ("sensing-only", &self.sensing_peaks_deg),
            ("isac", &self.isac_peaks_deg),
        ] {
            for p in peaks {
                w.write_record(&[scheme.to_string(), format!("{p:.2}")])?;
            }
        }
        w.flush()?;
        Ok(vec![path, peaks_path])
    }
}
