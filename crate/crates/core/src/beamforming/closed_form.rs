use num_complex::Complex64;

use super::projector::ProjectorSet;
use crate::channel::{steering, MultipathChannel};
use crate::error::{Error, Result};
use crate::math::{CMatrix, CVector};
use crate::sensing::SensingBudget;
use crate::waveform::DamBeamformer;

fn scaled_columns(cols: &[CVector], power: f64) -> Result<CMatrix> {
    let total: f64 = cols.iter().map(|c| c.norm_squared()).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Degenerate(
            "all projected directions are zero".into(),
        ));
    }
    let scale = Complex64::new((power / total).sqrt(), 0.0);
    Ok(CMatrix::from_columns(cols) * scale)
}

/// `f_l = √P Q_l h_l / √(Σ‖Q_l h_l‖²)`: the ISI-ZF beamformer with the largest
/// `|Σ h_l^H f_l|²` under `Σ‖f_l‖² ≤ P`.
pub fn isi_zf_mrt_beamformer(ch: &MultipathChannel, power: f64) -> Result<DamBeamformer> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::invalid("power", "must be positive"));
    }
    let proj = ProjectorSet::new(ch)?;
    let cols: Vec<CVector> = (0..ch.num_paths())
        .map(|l| proj.project(l, ch.path_vector(l)))
        .collect();
    DamBeamformer::for_channel(scaled_columns(&cols, power)?, ch)
}

/// Sensing-only ISI-ZF beamformer and its sensing SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingZf {
    pub beamformer: DamBeamformer,
    /// `|α|² N P Σ‖Q_l a‖⁴ / (σ² Σ‖Q_l a‖²)`
    pub gamma_zf_max: f64,
}

/// `f_l = √P Q_l a(θ) / √(Σ‖Q_l a(θ)‖²)`.
pub fn sensing_only_zf_beamformer(
    ch: &MultipathChannel,
    theta: f64,
    power: f64,
    budget: &SensingBudget,
) -> Result<SensingZf> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::invalid("power", "must be positive"));
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta", "must be finite"));
    }
    let proj = ProjectorSet::new(ch)?;
    let a = steering(theta, ch.num_antennas());
    let cols: Vec<CVector> = (0..ch.num_paths()).map(|l| proj.project(l, &a)).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.norm_squared()).collect();
    let total: f64 = norms.iter().sum();
    // a(θ) inside the span of every H_l: ZF leaves no energy toward the target.
    if total <= 1e-24 * a.norm_squared() {
        return Err(Error::SensingInfeasible {
            required: f64::MIN_POSITIVE,
            achievable: 0.0,
        });
    }
    let gain = power * norms.iter().map(|n| n * n).sum::<f64>() / total;
    Ok(SensingZf {
        beamformer: DamBeamformer::for_channel(scaled_columns(&cols, power)?, ch)?,
        gamma_zf_max: budget.snr(gain),
    })
}
