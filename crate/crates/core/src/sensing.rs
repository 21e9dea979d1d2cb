//! Matched-filter sensing of the DAM echo.
//!
//! The monostatic receiver knows the transmitted block, so for each
//! delay-Doppler hypothesis `(n_p, f_q)` it correlates the echo with the unit
//! norm template `a^H(θ) F S̄[n - n_p] diag(d[f_q]) / ‖·‖`. Unit-norm templates
//! keep the post-filter noise at `σ²` in every cell, and at the true cell the
//! output SNR tends to `|α|² N a^H F F^H a / σ²` because the delayed symbol
//! streams decorrelate (`Λ(n_s, n_s) → N I_L`).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::channel::{ula_response, ScenarioConfig, HALF_WAVELENGTH};
use crate::error::{Error, Result};
use crate::math::{self, phasor, CMatrix, SPEED_OF_LIGHT, ZERO};
use crate::waveform::{delayed_symbols, DamBeamformer, SymbolBlock};

/// Gain, CPI length and noise level that turn a beam gain `a^H F F^H a`
/// into a sensing SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingBudget {
    #[serde(with = "math::complex_serde")]
    pub alpha: Complex64,
    /// N
    pub cpi_length: usize,
    /// σ²
    pub noise_power: f64,
}

impl SensingBudget {
    pub fn new(alpha: Complex64, cpi_length: usize, noise_power: f64) -> Self {
        SensingBudget {
            alpha,
            cpi_length,
            noise_power,
        }
    }

    /// `|α|² N g / σ²`
    pub fn snr(&self, beam_gain: f64) -> f64 {
        self.alpha.norm_sqr() * self.cpi_length as f64 * beam_gain / self.noise_power
    }

    /// Beam gain needed for `gamma_th`: `γ_th σ² / (|α|² N)`.
    pub fn required_gain(&self, gamma_th: f64) -> f64 {
        gamma_th * self.noise_power / (self.alpha.norm_sqr() * self.cpi_length as f64)
    }
}

/// `a^H(θ) F F^H a(θ) = Σ_l |a^H f_l|²`
pub fn beam_gain(beams: &CMatrix, theta: f64) -> f64 {
    let a = ula_response(theta, beams.nrows(), HALF_WAVELENGTH);
    (beams.adjoint() * a).norm_squared()
}

/// `γ_p = |α|² N a^H(θ) F F^H a(θ) / σ²`
pub fn sensing_snr(
    beams: &CMatrix,
    theta: f64,
    alpha: Complex64,
    cpi_length: usize,
    noise_power: f64,
) -> f64 {
    SensingBudget::new(alpha, cpi_length, noise_power).snr(beam_gain(beams, theta))
}

/// `γ_p,max = |α|² N M P / σ²`, reached by `f_l = √(P/(ML)) a(θ)`.
pub fn max_sensing_snr(
    num_antennas: usize,
    cpi_length: usize,
    power: f64,
    alpha: Complex64,
    noise_power: f64,
) -> f64 {
    alpha.norm_sqr() * cpi_length as f64 * num_antennas as f64 * power / noise_power
}

/// Delay-Doppler hypotheses. Delay bins are integer symbol lags, Doppler bins
/// are frequencies inside `(-1/(2T_s), 1/(2T_s)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingGrid {
    delay_bins: Vec<usize>,
    doppler_bins: Vec<f64>,
    symbol_duration: f64,
    cpi_length: usize,
}

impl SensingGrid {
    pub fn new(
        delay_bins: Vec<usize>,
        doppler_bins: Vec<f64>,
        symbol_duration: f64,
        cpi_length: usize,
    ) -> Result<Self> {
        if delay_bins.is_empty() || doppler_bins.is_empty() {
            return Err(Error::invalid(
                "grid",
                "needs at least one delay and one Doppler bin",
            ));
        }
        if !(symbol_duration.is_finite() && symbol_duration > 0.0) {
            return Err(Error::invalid("symbol_duration", "must be positive"));
        }
        if cpi_length == 0 {
            return Err(Error::invalid("cpi_length", "must be at least 1"));
        }
        let nyquist = 0.5 / symbol_duration;
        let slack = 1e-9 * nyquist;
        if let Some(f) = doppler_bins
            .iter()
            .find(|f| !f.is_finite() || **f <= -nyquist + slack || **f > nyquist + slack)
        {
            return Err(Error::invalid(
                "doppler_bins",
                format!("{f} Hz outside the unambiguous interval (-{nyquist}, {nyquist}]"),
            ));
        }
        Ok(SensingGrid {
            delay_bins,
            doppler_bins,
            symbol_duration,
            cpi_length,
        })
    }

    /// `2·half_width + 1` Doppler bins spaced by the resolution `1/(N T_s)`
    /// around bin index `center` (frequency `center/(N T_s)`).
    pub fn resolution_spaced(
        delay_bins: Vec<usize>,
        center: i64,
        half_width: usize,
        symbol_duration: f64,
        cpi_length: usize,
    ) -> Result<Self> {
        let res = 1.0 / (cpi_length as f64 * symbol_duration);
        let hw = half_width as i64;
        let doppler = (-hw..=hw).map(|q| (center + q) as f64 * res).collect();
        Self::new(delay_bins, doppler, symbol_duration, cpi_length)
    }

    /// All `N` resolution-spaced bins covering `(-1/(2T_s), 1/(2T_s)]`.
    pub fn full_doppler(
        delay_bins: Vec<usize>,
        symbol_duration: f64,
        cpi_length: usize,
    ) -> Result<Self> {
        let n = cpi_length as i64;
        let res = 1.0 / (cpi_length as f64 * symbol_duration);
        let doppler = full_span_indices(n).map(|k| k as f64 * res).collect();
        Self::new(delay_bins, doppler, symbol_duration, cpi_length)
    }

    pub fn delay_bins(&self) -> &[usize] {
        &self.delay_bins
    }

    pub fn doppler_bins(&self) -> &[f64] {
        &self.doppler_bins
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    pub fn cpi_length(&self) -> usize {
        self.cpi_length
    }

    /// 1/B = T_s
    pub fn delay_resolution(&self) -> f64 {
        self.symbol_duration
    }

    /// 1/(N T_s)
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / (self.cpi_length as f64 * self.symbol_duration)
    }
}

/// Signed FFT bin indices in ascending frequency order, covering
/// `(-N/2, N/2]`.
fn full_span_indices(n: i64) -> impl Iterator<Item = i64> {
    (-(n - 1) / 2)..=(n / 2)
}

/// Matched-filter outputs `r(n_p, f_q)` on a [`SensingGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerMap {
    values: DMatrix<Complex64>,
    grid: SensingGrid,
}

impl DelayDopplerMap {
    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn grid(&self) -> &SensingGrid {
        &self.grid
    }

    /// `|r|²` at (delay index, Doppler index).
    pub fn power(&self, p: usize, q: usize) -> f64 {
        self.values[(p, q)].norm_sqr()
    }

    /// CSV: a header of Doppler bin frequencies, then one row per delay bin
    /// starting with the bin index, cells in dB of `|r|²`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["delay_bin".to_string()];
        header.extend(self.grid.doppler_bins.iter().map(|f| format!("{f:.6}")));
        w.write_record(&header)?;
        for (p, &d) in self.grid.delay_bins.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend(
                (0..self.grid.doppler_bins.len())
                    .map(|q| format!("{:.4}", math::linear_to_db(self.power(p, q)))),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unnormalized template `u[n] = Σ_l (a^H f_l) s[n - κ_l - n_p]`.
fn delay_template(
    bf: &DamBeamformer,
    sym: &SymbolBlock,
    theta: f64,
    delay_bin: usize,
) -> Vec<Complex64> {
    let a = ula_response(theta, bf.num_antennas(), HALF_WAVELENGTH);
    let weights: Vec<Complex64> = (0..bf.num_paths())
        .map(|l| a.dotc(&bf.beams().column(l)))
        .collect();
    let n = sym.len();
    let mut u = vec![ZERO; n];
    for (&w, &kappa) in weights.iter().zip(bf.delays()) {
        let lag = kappa + delay_bin;
        for (uk, &s) in u.iter_mut().skip(lag).zip(sym.symbols()) {
            *uk += w * s;
        }
    }
    u
}

pub fn doppler_phasors(doppler: f64, n: usize, symbol_duration: f64) -> Vec<Complex64> {
    let step = 2.0 * PI * doppler * symbol_duration;
    (0..n).map(|k| phasor(step * k as f64)).collect()
}

/// Unit-norm row `a^H(θ) F S̄[n - n_p] diag(d[f_q]) / ‖·‖`.
pub fn matched_filter_template(
    bf: &DamBeamformer,
    sym: &SymbolBlock,
    theta: f64,
    delay_bin: usize,
    doppler: f64,
    symbol_duration: f64,
) -> Result<Vec<Complex64>> {
    let u = delay_template(bf, sym, theta, delay_bin);
    let norm = math::energy(&u).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(format!(
            "zero matched-filter template at delay bin {delay_bin}"
        )));
    }
    let d = doppler_phasors(doppler, u.len(), symbol_duration);
    Ok(u.iter().zip(d).map(|(x, p)| x * p / norm).collect())
}

fn check_lengths(echo: &[Complex64], sym: &SymbolBlock, grid: &SensingGrid) -> Result<()> {
    if echo.len() != grid.cpi_length || sym.len() != grid.cpi_length {
        return Err(Error::DimensionMismatch(format!(
            "echo has {} samples, symbols {}, grid expects N = {}",
            echo.len(),
            sym.len(),
            grid.cpi_length
        )));
    }
    Ok(())
}

/// Matched-filter bank over every cell of `grid`:
/// `r(n_p, f_q) = Σ_n y[n] conj(h(n_p, f_q)[n])`.
pub fn delay_doppler_map(
    echo: &[Complex64],
    bf: &DamBeamformer,
    sym: &SymbolBlock,
    theta: f64,
    grid: &SensingGrid,
) -> Result<DelayDopplerMap> {
    check_lengths(echo, sym, grid)?;
    let ts = grid.symbol_duration;
    let rows: Vec<Vec<Complex64>> = grid
        .delay_bins
        .par_iter()
        .map(|&np| {
            let u = delay_template(bf, sym, theta, np);
            let norm = math::energy(&u).sqrt();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "zero matched-filter template at delay bin {np}"
                )));
            }
            // y[n] conj(u[n]) once per delay, then one Doppler rotation per cell.
            let prod: Vec<Complex64> = echo.iter().zip(&u).map(|(y, u)| y * u.conj()).collect();
            Ok(grid
                .doppler_bins
                .iter()
                .map(|&f| {
                    let step = -2.0 * PI * f * ts;
                    prod.iter()
                        .enumerate()
                        .map(|(k, v)| v * phasor(step * k as f64))
                        .sum::<Complex64>()
                        / norm
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let q = grid.doppler_bins.len();
    let values = DMatrix::from_fn(rows.len(), q, |p, j| rows[p][j]);
    Ok(DelayDopplerMap {
        values,
        grid: grid.clone(),
    })
}

/// Same bank on [`SensingGrid::full_doppler`], evaluated with one FFT per
/// delay bin.
pub fn delay_doppler_map_full(
    echo: &[Complex64],
    bf: &DamBeamformer,
    sym: &SymbolBlock,
    theta: f64,
    delay_bins: Vec<usize>,
    symbol_duration: f64,
) -> Result<DelayDopplerMap> {
    let n = echo.len();
    let grid = SensingGrid::full_doppler(delay_bins, symbol_duration, n)?;
    check_lengths(echo, sym, &grid)?;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let rows: Vec<Vec<Complex64>> = grid
        .delay_bins
        .par_iter()
        .map(|&np| {
            let u = delay_template(bf, sym, theta, np);
            let norm = math::energy(&u).sqrt();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "zero matched-filter template at delay bin {np}"
                )));
            }
            let mut buf: Vec<Complex64> = echo
                .iter()
                .zip(&u)
                .map(|(y, u)| y * u.conj() / norm)
                .collect();
            fft.process(&mut buf);
            Ok(full_span_indices(n as i64)
                .map(|k| buf[k.rem_euclid(n as i64) as usize])
                .collect())
        })
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(rows.len(), n, |p, j| rows[p][j]);
    Ok(DelayDopplerMap { values, grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayDopplerEstimate {
    /// n̂_s (symbols)
    pub delay_bin: usize,
    /// f̂_d (Hz)
    pub doppler: f64,
    pub peak_power: f64,
}

/// Peak of `|r|²`; ties go to the smaller delay, then the smaller `|f|`.
pub fn estimate_delay_doppler(map: &DelayDopplerMap) -> Result<DelayDopplerEstimate> {
    let grid = &map.grid;
    let mut best: Option<DelayDopplerEstimate> = None;
    for (p, &delay) in grid.delay_bins.iter().enumerate() {
        for (q, &f) in grid.doppler_bins.iter().enumerate() {
            let power = map.power(p, q);
            let better = match &best {
                None => true,
                Some(b) => {
                    power > b.peak_power
                        || (power == b.peak_power
                            && (delay < b.delay_bin
                                || (delay == b.delay_bin && f.abs() < b.doppler.abs())))
                }
            };
            if better {
                best = Some(DelayDopplerEstimate {
                    delay_bin: delay,
                    doppler: f,
                    peak_power: power,
                });
            }
        }
    }
    best.ok_or_else(|| Error::invalid("map", "empty delay-Doppler map"))
}

/// `Λ(n_p, n_s) = S̄[n - n_s] S̄^H[n - n_p]` (L×L), symbols zero before the
/// block start.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub values: CMatrix,
    pub block_length: usize,
}

impl CorrelationMatrix {
    /// `max_{i≠j} |Λ_ij| / N`
    pub fn max_off_diagonal_normalized(&self) -> f64 {
        let l = self.values.nrows();
        let mut worst = 0f64;
        for i in 0..l {
            for j in 0..l {
                if i != j {
                    worst = worst.max(self.values[(i, j)].norm());
                }
            }
        }
        worst / self.block_length as f64
    }
}

pub fn correlation_matrix(
    sym: &SymbolBlock,
    delays: &[usize],
    delay_bin: usize,
    true_delay: usize,
) -> CorrelationMatrix {
    let s_true = delayed_symbols(sym, delays, true_delay);
    let s_bin = delayed_symbols(sym, delays, delay_bin);
    CorrelationMatrix {
        values: &s_true * s_bin.adjoint(),
        block_length: sym.len(),
    }
}

/// SNR of repeated noisy observations `r_t = s + z_t` of one deterministic
/// value: `(|mean|² − var/T) / var` with the unbiased variance. Subtracting
/// `var/T` removes the noise left in `|mean|²`, which matters at low SNR.
pub fn empirical_snr(samples: &[Complex64]) -> f64 {
    let n = samples.len() as f64;
    let mean: Complex64 = samples.iter().sum::<Complex64>() / n;
    let var = samples.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    (mean.norm_sqr() - var / n) / var
}

/// Unambiguous intervals and resolutions of DAM sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamAmbiguity {
    /// N_p
    pub max_delay_symbols: usize,
    /// c N_p T_s / 2 (m)
    pub max_range: f64,
    /// 1/(2 T_s) (Hz)
    pub max_doppler: f64,
    /// f_d,max λ/2 (m/s)
    pub max_velocity: f64,
    /// c/(2B) (m)
    pub range_resolution: f64,
    /// 1/(N T_s) (Hz)
    pub doppler_resolution: f64,
    /// λ/(2 N T_s) (m/s)
    pub velocity_resolution: f64,
}

pub fn dam_ambiguity_limits(cfg: &ScenarioConfig) -> DamAmbiguity {
    let ts = cfg.symbol_duration();
    let lambda = cfg.wavelength();
    let max_doppler = 1.0 / (2.0 * ts);
    let doppler_resolution = 1.0 / (cfg.cpi_length() as f64 * ts);
    DamAmbiguity {
        max_delay_symbols: cfg.guard_length,
        max_range: SPEED_OF_LIGHT * cfg.guard_time() / 2.0,
        max_doppler,
        max_velocity: max_doppler * lambda / 2.0,
        range_resolution: SPEED_OF_LIGHT / (2.0 * cfg.bandwidth),
        doppler_resolution,
        velocity_resolution: doppler_resolution * lambda / 2.0,
    }
}
