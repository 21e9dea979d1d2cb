use serde::{Deserialize, Serialize};

use crate::channel::MultipathChannel;
use crate::error::{Error, Result};
use crate::math::CMatrix;
use crate::sensing::{beam_gain, SensingBudget};

/// Constraint residuals of a beamformer, recomputed from `F` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionAudit {
    /// `max_{l≠l'} |h_l^H f_l'|`
    pub zf_residual: f64,
    /// `max_{l≠l'} |h_l^H f_l'| / (max_l ‖h_l‖ · ‖f_l'‖)`
    pub zf_residual_relative: f64,
    /// `Σ‖f_l‖²`
    pub power: f64,
    /// `P − Σ‖f_l‖²`
    pub power_slack: f64,
    pub comm_snr: f64,
    pub sensing_snr: f64,
    pub gamma_th: f64,
    /// `γ_p − γ_th`
    pub sensing_slack: f64,
    pub power_budget: f64,
}

impl SolutionAudit {
    /// All constraints of the joint problem hold at relative tolerance `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.zf_residual_relative <= tol
            && self.power_slack >= -tol * self.power_budget
            && self.sensing_slack >= -tol * self.gamma_th.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn verify_solution(
    beams: &CMatrix,
    ch: &MultipathChannel,
    theta: f64,
    budget: &SensingBudget,
    gamma_th: f64,
    power: f64,
) -> Result<SolutionAudit> {
    if beams.ncols() != ch.num_paths() || beams.nrows() != ch.num_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "beamformer is {}x{}, channel has M = {}, L = {}",
            beams.nrows(),
            beams.ncols(),
            ch.num_antennas(),
            ch.num_paths()
        )));
    }
    let l_paths = ch.num_paths();
    let h_max = (0..l_paths)
        .map(|l| ch.path_vector(l).norm())
        .fold(0.0, f64::max);
    let mut zf_abs = 0f64;
    let mut zf_rel = 0f64;
    let mut aligned = num_complex::Complex64::new(0.0, 0.0);
    for j in 0..l_paths {
        let f = beams.column(j);
        let f_norm = f.norm();
        for l in 0..l_paths {
            let v = ch.path_vector(l).dotc(&f);
            if l == j {
                aligned += v;
            } else {
                zf_abs = zf_abs.max(v.norm());
                if f_norm > 0.0 && h_max > 0.0 {
                    zf_rel = zf_rel.max(v.norm() / (h_max * f_norm));
                }
            }
        }
    }
    let total = beams.norm_squared();
    let sensing_snr = budget.snr(beam_gain(beams, theta));
    Ok(SolutionAudit {
        zf_residual: zf_abs,
        zf_residual_relative: zf_rel,
        power: total,
        power_slack: power - total,
        comm_snr: aligned.norm_sqr() / budget.noise_power,
        sensing_snr,
        gamma_th,
        sensing_slack: sensing_snr - gamma_th,
        power_budget: power,
    })
}
