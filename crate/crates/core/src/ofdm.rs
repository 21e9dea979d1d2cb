//! MISO-OFDM radar reference.
//!
//! The echo is modelled directly per subcarrier and OFDM symbol, without ICI,
//! and the transform-domain estimator divides out the known symbols before a
//! 2-D transform. Doppler is therefore only unambiguous within `±1/(2T_o)`,
//! and the model itself is only trustworthy for `|f_d|` well below `Δf`;
//! both facts are flagged rather than rejected.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::{steering, RadarTarget, ScenarioConfig};
use crate::error::{Error, Result};
use crate::math::{self, phasor, CMatrix, SPEED_OF_LIGHT, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    /// K
    pub num_subcarriers: usize,
    /// N_p
    pub cp_length: usize,
    /// I = floor(N_c / (K + N_p))
    pub num_symbols: usize,
    /// N_c
    pub block_length: usize,
    pub bandwidth: f64,
    pub carrier_frequency: f64,
    /// `w_1..w_K` as columns (M×K).
    pub beams: CMatrix,
    /// Doppler validity threshold as a fraction of `Δf`.
    pub validity_fraction: f64,
}

impl OfdmConfig {
    /// Same bandwidth, carrier, block and guard as `cfg`, with `K` subcarriers
    /// and the given per-subcarrier beams.
    pub fn from_scenario(
        cfg: &ScenarioConfig,
        num_subcarriers: usize,
        beams: CMatrix,
    ) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::invalid("num_subcarriers", "must be at least 1"));
        }
        if beams.ncols() != num_subcarriers || beams.nrows() != cfg.num_antennas {
            return Err(Error::DimensionMismatch(format!(
                "beams are {}x{}, expected {}x{}",
                beams.nrows(),
                beams.ncols(),
                cfg.num_antennas,
                num_subcarriers
            )));
        }
        let num_symbols = cfg.block_length / (num_subcarriers + cfg.guard_length);
        if num_symbols == 0 {
            return Err(Error::invalid(
                "num_subcarriers",
                "K + N_p exceeds the block length",
            ));
        }
        Ok(OfdmConfig {
            num_subcarriers,
            cp_length: cfg.guard_length,
            num_symbols,
            block_length: cfg.block_length,
            bandwidth: cfg.bandwidth,
            carrier_frequency: cfg.carrier_frequency,
            beams,
            validity_fraction: 0.1,
        })
    }

    /// `w_k = √(P/(KM)) a(θ)` on every subcarrier.
    pub fn sensing_only(cfg: &ScenarioConfig, num_subcarriers: usize, theta: f64) -> Result<Self> {
        let powers = vec![cfg.transmit_power / num_subcarriers as f64; num_subcarriers];
        Self::from_scenario(
            cfg,
            num_subcarriers,
            sensing_beams(cfg.num_antennas, theta, &powers),
        )
    }

    /// T_s
    pub fn sample_duration(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// Δf = B/K
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.num_subcarriers as f64
    }

    /// T = K T_s
    pub fn symbol_duration(&self) -> f64 {
        self.num_subcarriers as f64 * self.sample_duration()
    }

    /// T_o = (K + N_p) T_s
    pub fn total_symbol_duration(&self) -> f64 {
        (self.num_subcarriers + self.cp_length) as f64 * self.sample_duration()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// `P_k = ‖w_k‖²`
    pub fn powers(&self) -> Vec<f64> {
        self.beams.column_iter().map(|c| c.norm_squared()).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.beams.norm_squared()
    }

    pub fn num_antennas(&self) -> usize {
        self.beams.nrows()
    }
}

/// `w_k = √(P_k/M) a(θ)`.
pub fn sensing_beams(num_antennas: usize, theta: f64, powers: &[f64]) -> CMatrix {
    let a = steering(theta, num_antennas);
    let cols: Vec<_> = powers
        .iter()
        .map(|p| a.scale((p / num_antennas as f64).sqrt()))
        .collect();
    CMatrix::from_columns(&cols)
}

/// Per-bin noise variance of a `K`-point transform normalized by `1/K`
/// applied to time-domain noise of variance `σ²`: `σ²/K`.
pub fn bin_noise_power(noise_power: f64, num_subcarriers: usize) -> f64 {
    noise_power / num_subcarriers as f64
}

/// Received symbols `y_r^{(k,i)}` (K×I) with validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmEcho {
    pub values: CMatrix,
    /// `|f_d| ≤ validity_fraction · Δf`
    pub doppler_valid: bool,
    /// `τ ≤ N_p T_s`
    pub delay_valid: bool,
}

/// `y = α a^H(θ) w_k x_{k,i} e^{j2π i T_o f_d} e^{−j2π k Δf τ} + z` with
/// `z ~ CN(0, bin_noise)`. Pass [`bin_noise_power`] of the time-domain noise
/// to stay consistent with the DAM link budget.
pub fn ofdm_radar_rx<R: Rng + ?Sized>(
    cfg: &OfdmConfig,
    tgt: &RadarTarget,
    symbols: &CMatrix,
    bin_noise: f64,
    rng: &mut R,
) -> Result<OfdmEcho> {
    let (k_count, i_count) = (cfg.num_subcarriers, cfg.num_symbols);
    if symbols.nrows() != k_count || symbols.ncols() != i_count {
        return Err(Error::DimensionMismatch(format!(
            "symbols are {}x{}, expected K×I = {}x{}",
            symbols.nrows(),
            symbols.ncols(),
            k_count,
            i_count
        )));
    }
    let a = steering(tgt.direction, cfg.num_antennas());
    let gains: Vec<Complex64> = cfg
        .beams
        .column_iter()
        .map(|w| tgt.gain * a.dotc(&w))
        .collect();
    let df = cfg.subcarrier_spacing();
    let to = cfg.total_symbol_duration();
    let mut values = DMatrix::from_fn(k_count, i_count, |k, i| {
        gains[k]
            * symbols[(k, i)]
            * phasor(2.0 * PI * i as f64 * to * tgt.doppler)
            * phasor(-2.0 * PI * k as f64 * df * tgt.delay_seconds)
    });
    math::add_awgn(rng, values.as_mut_slice(), bin_noise);
    Ok(OfdmEcho {
        values,
        doppler_valid: tgt.doppler.abs() <= cfg.validity_fraction * df,
        delay_valid: tgt.delay_seconds
            <= cfg.cp_length as f64 * cfg.sample_duration() * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmEstimate {
    pub delay_bin: usize,
    pub delay_seconds: f64,
    /// Wrapped to `(−1/(2T_o), 1/(2T_o)]`.
    pub doppler: f64,
    pub peak_power: f64,
}

/// Element-wise division by the known symbols, IDFT across subcarriers for
/// delay, DFT across symbols for Doppler, then the peak.
pub fn ofdm_delay_doppler_estimate(
    echo: &OfdmEcho,
    cfg: &OfdmConfig,
    symbols: &CMatrix,
) -> Result<OfdmEstimate> {
    let (k_count, i_count) = (cfg.num_subcarriers, cfg.num_symbols);
    if echo.values.shape() != (k_count, i_count) || symbols.shape() != (k_count, i_count) {
        return Err(Error::DimensionMismatch(
            "echo, symbols and config disagree on K×I".into(),
        ));
    }
    if symbols.iter().any(|x| x.norm_sqr() == 0.0) {
        return Err(Error::invalid("symbols", "cannot divide out a zero symbol"));
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(k_count);
    let fft = planner.plan_fft_forward(i_count);

    // grid[n][i]: delay profile of symbol i
    let mut grid = vec![vec![ZERO; i_count]; k_count];
    let mut col = vec![ZERO; k_count];
    for i in 0..i_count {
        for k in 0..k_count {
            col[k] = echo.values[(k, i)] / symbols[(k, i)];
        }
        ifft.process(&mut col);
        for n in 0..k_count {
            grid[n][i] = col[n];
        }
    }
    let mut best: Option<(usize, i64, f64)> = None;
    for (n, row) in grid.iter_mut().enumerate() {
        fft.process(row);
        for (m, v) in row.iter().enumerate() {
            let signed = signed_bin(m, i_count);
            let p = v.norm_sqr();
            let better = match best {
                None => true,
                Some((bn, bm, bp)) => {
                    p > bp || (p == bp && (n < bn || (n == bn && signed.abs() < bm.abs())))
                }
            };
            if better {
                best = Some((n, signed, p));
            }
        }
    }
    let (n, m, p) = best.expect("K, I ≥ 1");
    Ok(OfdmEstimate {
        delay_bin: n,
        delay_seconds: n as f64 * cfg.sample_duration(),
        doppler: m as f64 / (i_count as f64 * cfg.total_symbol_duration()),
        peak_power: p,
    })
}

/// FFT index to a signed bin in `(−I/2, I/2]`.
fn signed_bin(m: usize, len: usize) -> i64 {
    let (m, len) = (m as i64, len as i64);
    if m > len / 2 {
        m - len
    } else {
        m
    }
}

/// Matched accumulation over all `(k, i)` with the unit-norm template built
/// from the true delay and Doppler.
pub fn ofdm_matched_output(
    echo: &OfdmEcho,
    cfg: &OfdmConfig,
    symbols: &CMatrix,
    tgt: &RadarTarget,
) -> Result<Complex64> {
    let a = steering(tgt.direction, cfg.num_antennas());
    let df = cfg.subcarrier_spacing();
    let to = cfg.total_symbol_duration();
    let mut acc = ZERO;
    let mut energy = 0.0;
    for k in 0..cfg.num_subcarriers {
        let g = a.dotc(&cfg.beams.column(k));
        for i in 0..cfg.num_symbols {
            let t = g
                * symbols[(k, i)]
                * phasor(2.0 * PI * i as f64 * to * tgt.doppler)
                * phasor(-2.0 * PI * k as f64 * df * tgt.delay_seconds);
            acc += echo.values[(k, i)] * t.conj();
            energy += t.norm_sqr();
        }
    }
    if energy == 0.0 {
        return Err(Error::Degenerate(
            "zero OFDM matched-filter template".into(),
        ));
    }
    Ok(acc / energy.sqrt())
}

/// `γ_OFDM = |α|² I Σ_k |a^H(θ) w_k|² / (σ²/K)`.
pub fn ofdm_output_snr(cfg: &OfdmConfig, theta: f64, alpha: Complex64, noise_power: f64) -> f64 {
    let a = steering(theta, cfg.num_antennas());
    let gain: f64 = cfg.beams.column_iter().map(|w| a.dotc(&w).norm_sqr()).sum();
    alpha.norm_sqr() * cfg.num_symbols as f64 * gain
        / bin_noise_power(noise_power, cfg.num_subcarriers)
}

/// `|α|² M I K Σ_k P_k / σ²`, reached by `w_k = √(P_k/M) a(θ)`.
pub fn ofdm_max_snr(
    num_antennas: usize,
    num_symbols: usize,
    num_subcarriers: usize,
    total_power: f64,
    alpha: Complex64,
    noise_power: f64,
) -> f64 {
    alpha.norm_sqr() * (num_antennas * num_symbols * num_subcarriers) as f64 * total_power
        / noise_power
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmAmbiguity {
    /// c N_p T_s / 2 (m)
    pub max_range: f64,
    /// validity_fraction · Δf (Hz)
    pub max_doppler: f64,
    /// λ/(20 K T_s) (m/s)
    pub max_velocity: f64,
    /// c/(2B) (m)
    pub range_resolution: f64,
    /// λ/(2 N_c T_s) (m/s)
    pub velocity_resolution: f64,
    pub max_delay_symbols: usize,
}

pub fn ofdm_ambiguity_limits(cfg: &OfdmConfig) -> OfdmAmbiguity {
    let ts = cfg.sample_duration();
    let lambda = cfg.wavelength();
    OfdmAmbiguity {
        max_range: SPEED_OF_LIGHT * cfg.cp_length as f64 * ts / 2.0,
        max_doppler: cfg.validity_fraction * cfg.subcarrier_spacing(),
        max_velocity: lambda / (20.0 * cfg.num_subcarriers as f64 * ts),
        range_resolution: SPEED_OF_LIGHT / (2.0 * cfg.bandwidth),
        velocity_resolution: lambda / (2.0 * cfg.block_length as f64 * ts),
        max_delay_symbols: cfg.cp_length,
    }
}

/// Inputs of the peak-power comparison between DAM and OFDM sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPowerSetup {
    pub num_antennas: usize,
    /// N (DAM symbols per block)
    pub cpi_length: usize,
    /// L (DAM paths, η_DAM = L)
    pub num_paths: usize,
    /// I (OFDM symbols per block)
    pub num_symbols: usize,
    /// K (η_OFDM = K)
    pub num_subcarriers: usize,
    pub peak_power: f64,
    #[serde(with = "math::complex_serde")]
    pub alpha: Complex64,
    pub noise_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPowerComparison {
    /// `|α|² M I K P_max / σ²`
    pub ofdm_average: f64,
    /// `|α|² M I P_max / σ²`
    pub ofdm_peak: f64,
    /// `|α|² M N P_max / σ²`
    pub dam_average: f64,
    /// `|α|² M N P_max / (L σ²)`
    pub dam_peak: f64,
    /// `dam_peak / ofdm_peak = N/(L I)`
    pub peak_ratio: f64,
}

/// Sensing SNR of both schemes when the average power is `P_max/η` with
/// `η_OFDM = K` and `η_DAM = L`, next to the average-power values.
pub fn peak_power_constrained_snr_comparison(s: &PeakPowerSetup) -> PeakPowerComparison {
    let base = s.alpha.norm_sqr() * s.num_antennas as f64 * s.peak_power / s.noise_power;
    let ofdm_average = base * (s.num_symbols * s.num_subcarriers) as f64;
    let ofdm_peak = ofdm_average / s.num_subcarriers as f64;
    let dam_average = base * s.cpi_length as f64;
    let dam_peak = dam_average / s.num_paths as f64;
    PeakPowerComparison {
        ofdm_average,
        ofdm_peak,
        dam_average,
        dam_peak,
        peak_ratio: dam_peak / ofdm_peak,
    }
}

/// Time-domain transmit block (M × I(K+cp)): unitary IDFT of `w_k x_{k,i}`
/// per symbol and antenna, with the last `cp` samples prepended.
pub fn ofdm_time_domain(beams: &CMatrix, symbols: &CMatrix, cp: usize) -> Result<CMatrix> {
    let (m, k_count) = beams.shape();
    if symbols.nrows() != k_count {
        return Err(Error::DimensionMismatch(format!(
            "{} subcarrier beams but {} symbol rows",
            k_count,
            symbols.nrows()
        )));
    }
    if cp > k_count {
        return Err(Error::invalid("cp", "cyclic prefix longer than the symbol"));
    }
    let i_count = symbols.ncols();
    let len = k_count + cp;
    let ifft = FftPlanner::new().plan_fft_inverse(k_count);
    let norm = 1.0 / (k_count as f64).sqrt();
    let mut out = CMatrix::zeros(m, i_count * len);
    let mut buf = vec![ZERO; k_count];
    for i in 0..i_count {
        for ant in 0..m {
            for k in 0..k_count {
                buf[k] = beams[(ant, k)] * symbols[(k, i)] * norm;
            }
            ifft.process(&mut buf);
            let base = i * len;
            for t in 0..cp {
                out[(ant, base + t)] = buf[k_count - cp + t];
            }
            for t in 0..k_count {
                out[(ant, base + cp + t)] = buf[t];
            }
        }
    }
    Ok(out)
}
