//! Channel models.
//!
//! The communication link is a wideband MISO channel with `L` temporally
//! resolvable paths, each a complex vector `h_l` with an integer symbol delay
//! `n_l`. The sensing link is a single line-of-sight round trip to a point
//! target with gain `α`, direction `θ`, delay `n_s` and Doppler `f_d`.
//!
//! The transmit array is a uniform linear array with half-wavelength spacing,
//! elements indexed `0..M` and phase reference at element 0.

use log::warn;
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{self, complex_gaussian, phasor, CMatrix, CVector, SPEED_OF_LIGHT, ZERO};

/// Element spacing in wavelengths of the default array.
pub const HALF_WAVELENGTH: f64 = 0.5;

/// ULA response toward `theta` (rad):
/// element `m` is `exp(j 2π (d/λ) m sin θ)`.
pub fn steering_vector(theta: f64, num_antennas: usize, spacing: f64) -> Result<CVector> {
    if !theta.is_finite() {
        return Err(Error::invalid(
            "theta",
            format!("angle must be finite, got {theta}"),
        ));
    }
    if num_antennas == 0 {
        return Err(Error::invalid(
            "num_antennas",
            "array needs at least one element",
        ));
    }
    Ok(ula_response(theta, num_antennas, spacing))
}

/// [`steering_vector`] with the default half-wavelength spacing; `theta`
/// must be finite.
pub(crate) fn ula_response(theta: f64, num_antennas: usize, spacing: f64) -> CVector {
    let step = 2.0 * PI * spacing * theta.sin();
    CVector::from_iterator(
        num_antennas,
        (0..num_antennas).map(|m| phasor(step * m as f64)),
    )
}

/// Half-wavelength steering vector. Panics on a non-finite angle.
pub fn steering(theta: f64, num_antennas: usize) -> CVector {
    assert!(theta.is_finite(), "steering angle must be finite");
    ula_response(theta, num_antennas, HALF_WAVELENGTH)
}

/// System-level parameters of one scenario, all in SI linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// M
    pub num_antennas: usize,
    /// B (Hz); the symbol duration is `T_s = 1/B`.
    pub bandwidth: f64,
    /// f_c (Hz)
    pub carrier_frequency: f64,
    /// T_c (s)
    pub coherence_time: f64,
    /// N_c = N + N_p (symbols)
    pub block_length: usize,
    /// N_p (symbols); must cover the largest path or target delay.
    pub guard_length: usize,
    /// P (W), average transmit power budget.
    pub transmit_power: f64,
    /// σ² (W)
    pub noise_power: f64,
}

impl ScenarioConfig {
    /// Builds a scenario from times and checks the invariants. Block and guard
    /// lengths are `round(T_c B)` and `round(T_p B)`.
    pub fn from_times(
        num_antennas: usize,
        bandwidth: f64,
        carrier_frequency: f64,
        coherence_time: f64,
        guard_time: f64,
        transmit_power: f64,
        noise_power: f64,
    ) -> Result<Self> {
        let cfg = ScenarioConfig {
            num_antennas,
            bandwidth,
            carrier_frequency,
            coherence_time,
            block_length: (coherence_time * bandwidth).round() as usize,
            guard_length: (guard_time * bandwidth).round() as usize,
            transmit_power,
            noise_power,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// mmWave reference scenario: B = 100 MHz, f_c = 28 GHz, M = 64,
    /// T_c = 1 ms, T_p = 2 μs, P = 30 dBm and noise density -169 dBm/Hz.
    pub fn reference() -> Self {
        let bandwidth = 100e6;
        let noise = math::dbm_to_watts(-169.0) * bandwidth;
        Self::from_times(
            64,
            bandwidth,
            28e9,
            1e-3,
            2e-6,
            math::dbm_to_watts(30.0),
            noise,
        )
        .expect("reference scenario is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("bandwidth", self.bandwidth)?;
        positive("carrier_frequency", self.carrier_frequency)?;
        positive("coherence_time", self.coherence_time)?;
        positive("transmit_power", self.transmit_power)?;
        positive("noise_power", self.noise_power)?;
        if self.num_antennas == 0 {
            return Err(Error::invalid("num_antennas", "must be at least 1"));
        }
        if self.block_length <= self.guard_length {
            return Err(Error::invalid(
                "block_length",
                format!(
                    "N_c = {} must exceed the guard N_p = {} (N = N_c - N_p >= 1)",
                    self.block_length, self.guard_length
                ),
            ));
        }
        Ok(())
    }

    /// T_s = 1/B
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.bandwidth
    }

    /// λ = c / f_c
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// N = N_c - N_p, the DAM symbols per block (and per sensing CPI).
    pub fn cpi_length(&self) -> usize {
        self.block_length - self.guard_length
    }

    /// T_p = N_p T_s
    pub fn guard_time(&self) -> f64 {
        self.guard_length as f64 * self.symbol_duration()
    }
}

/// Generator metadata of one path: `h = β Σ_i ν_i a(θ_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGenerator {
    #[serde(with = "math::complex_serde")]
    pub gain: Complex64,
    pub subpaths: Vec<Subpath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subpath {
    #[serde(with = "math::complex_serde")]
    pub coefficient: Complex64,
    /// Angle of departure (rad).
    pub aod: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPath {
    #[serde(with = "math::cvector_serde")]
    pub vector: CVector,
    pub delay: usize,
    /// Usually one entry; more after merging paths that fell in the same
    /// delay bin.
    #[serde(default)]
    pub generators: Vec<PathGenerator>,
}

/// L-path MISO channel `h_c^H[n] = Σ_l h_l^H δ[n - n_l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRecord", into = "ChannelRecord")]
pub struct MultipathChannel {
    paths: Vec<ChannelPath>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRecord {
    paths: Vec<ChannelPath>,
}

impl TryFrom<ChannelRecord> for MultipathChannel {
    type Error = Error;
    fn try_from(r: ChannelRecord) -> Result<Self> {
        MultipathChannel::new(r.paths)
    }
}

impl From<MultipathChannel> for ChannelRecord {
    fn from(c: MultipathChannel) -> Self {
        ChannelRecord { paths: c.paths }
    }
}

impl MultipathChannel {
    /// Builds a channel, merging paths with equal delay by summing their
    /// vectors. Path order follows first occurrence.
    pub fn new(paths: Vec<ChannelPath>) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| Error::invalid("paths", "channel needs at least one path"))?;
        let m = first.vector.len();
        if m == 0 {
            return Err(Error::invalid("paths", "path vectors must be non-empty"));
        }
        let mut merged: Vec<ChannelPath> = Vec::with_capacity(paths.len());
        for p in paths {
            if p.vector.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "path vector of length {} in a channel with M = {m}",
                    p.vector.len()
                )));
            }
            match merged.iter_mut().find(|q| q.delay == p.delay) {
                Some(q) => {
                    q.vector += &p.vector;
                    q.generators.extend(p.generators);
                }
                None => merged.push(p),
            }
        }
        Ok(MultipathChannel { paths: merged })
    }

    pub fn from_vectors(vectors: Vec<CVector>, delays: &[usize]) -> Result<Self> {
        if vectors.len() != delays.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} path vectors but {} delays",
                vectors.len(),
                delays.len()
            )));
        }
        Self::new(
            vectors
                .into_iter()
                .zip(delays)
                .map(|(vector, &delay)| ChannelPath {
                    vector,
                    delay,
                    generators: Vec::new(),
                })
                .collect(),
        )
    }

    /// Deterministic channel with one unit-gain sub-path per delay, pointing
    /// at the given AoDs (rad).
    pub fn from_directions(num_antennas: usize, aods: &[f64], delays: &[usize]) -> Result<Self> {
        if aods.len() != delays.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} AoDs but {} delays",
                aods.len(),
                delays.len()
            )));
        }
        let paths = aods
            .iter()
            .zip(delays)
            .map(|(&aod, &delay)| {
                Ok(ChannelPath {
                    vector: steering_vector(aod, num_antennas, HALF_WAVELENGTH)?,
                    delay,
                    generators: vec![PathGenerator {
                        gain: math::ONE,
                        subpaths: vec![Subpath {
                            coefficient: math::ONE,
                            aod,
                        }],
                    }],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(paths)
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.paths[0].vector.len()
    }

    pub fn paths(&self) -> &[ChannelPath] {
        &self.paths
    }

    pub fn path_vector(&self, l: usize) -> &CVector {
        &self.paths[l].vector
    }

    pub fn delays(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.delay).collect()
    }

    /// n_max = max_l n_l
    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay).max().unwrap_or(0)
    }

    /// `[h_1, ..., h_L]` as an M×L matrix.
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_columns(
            &self
                .paths
                .iter()
                .map(|p| p.vector.clone())
                .collect::<Vec<_>>(),
        )
    }
}

/// Parameters of the random mmWave path generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGenConfig {
    /// L
    pub num_paths: usize,
    /// μ_max; each path draws μ_l uniformly from `1..=μ_max`.
    pub max_subpaths: usize,
    /// Feasible AoD sector (rad).
    pub aod_min: f64,
    pub aod_max: f64,
    /// Largest delay that may be drawn; `None` means the guard length N_p.
    pub max_delay: Option<usize>,
}

impl ChannelGenConfig {
    /// μ_max = 3 and AoDs in [-60°, 60°].
    pub fn mmwave(num_paths: usize) -> Self {
        ChannelGenConfig {
            num_paths,
            max_subpaths: 3,
            aod_min: (-60f64).to_radians(),
            aod_max: 60f64.to_radians(),
            max_delay: None,
        }
    }
}

/// Draws one channel realization:
/// `h_l = β_l Σ_{i=1}^{μ_l} ν_li a(θ_li)` with `β_l ~ CN(0, 1/L)`,
/// `ν_li ~ CN(0, 1/μ_l)`, `θ_li ~ U[aod_min, aod_max]`, and distinct delays
/// drawn from `[0, max_delay]` with the first arrival fixed at 0.
pub fn generate_multipath_channel<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    gen: &ChannelGenConfig,
    rng: &mut R,
) -> Result<MultipathChannel> {
    let l_paths = gen.num_paths;
    if l_paths == 0 {
        return Err(Error::invalid("num_paths", "L must be at least 1"));
    }
    if gen.max_subpaths == 0 {
        return Err(Error::invalid("max_subpaths", "mu_max must be at least 1"));
    }
    if !(gen.aod_min.is_finite() && gen.aod_max.is_finite() && gen.aod_min <= gen.aod_max) {
        return Err(Error::invalid(
            "aod",
            "sector bounds must be finite with min <= max",
        ));
    }
    let max_delay = gen.max_delay.unwrap_or(cfg.guard_length);
    if max_delay > cfg.guard_length {
        return Err(Error::invalid(
            "max_delay",
            format!(
                "delay spread {max_delay} exceeds guard N_p = {}",
                cfg.guard_length
            ),
        ));
    }
    if l_paths > max_delay + 1 {
        return Err(Error::invalid(
            "num_paths",
            format!("L = {l_paths} distinct delays do not fit in [0, {max_delay}]"),
        ));
    }

    let mut delays = Vec::with_capacity(l_paths);
    delays.push(0);
    if l_paths > 1 {
        delays.extend(
            index::sample(rng, max_delay, l_paths - 1)
                .into_iter()
                .map(|d| d + 1),
        );
    }

    let m = cfg.num_antennas;
    let beta_var = 1.0 / l_paths as f64;
    let paths = delays
        .into_iter()
        .map(|delay| {
            let gain = complex_gaussian(rng, beta_var);
            let mu = rng.random_range(1..=gen.max_subpaths);
            let subpaths: Vec<Subpath> = (0..mu)
                .map(|_| Subpath {
                    coefficient: complex_gaussian(rng, 1.0 / mu as f64),
                    aod: rng.random_range(gen.aod_min..=gen.aod_max),
                })
                .collect();
            let mut vector = CVector::from_element(m, ZERO);
            for sp in &subpaths {
                vector.axpy(
                    gain * sp.coefficient,
                    &ula_response(sp.aod, m, HALF_WAVELENGTH),
                    math::ONE,
                );
            }
            ChannelPath {
                vector,
                delay,
                generators: vec![PathGenerator { gain, subpaths }],
            }
        })
        .collect();
    MultipathChannel::new(paths)
}

/// Received communication samples
/// `y_c[n] = Σ_l h_l^H x[n - n_l] + z[n]`, `n = 0..N_tx`, with the transmit
/// signal taken as zero before the block start.
pub fn apply_comm_channel<R: Rng + ?Sized>(
    ch: &MultipathChannel,
    tx_block: &CMatrix,
    noise_power: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if tx_block.nrows() != ch.num_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "transmit block has {} rows, channel has M = {}",
            tx_block.nrows(),
            ch.num_antennas()
        )));
    }
    let n_tx = tx_block.ncols();
    // h_l^H x for every column once, then shift per path.
    let projections: Vec<Vec<Complex64>> = ch
        .paths()
        .iter()
        .map(|p| {
            let row = p.vector.adjoint() * tx_block;
            row.iter().copied().collect()
        })
        .collect();
    let mut y = vec![ZERO; n_tx];
    for (p, proj) in ch.paths().iter().zip(&projections) {
        for n in p.delay..n_tx {
            y[n] += proj[n - p.delay];
        }
    }
    math::add_awgn(rng, &mut y, noise_power);
    Ok(y)
}

/// How a target delay beyond the guard interval is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayPolicy {
    /// Reject with [`Error::AmbiguousDelay`].
    Strict,
    /// Log a warning and simulate anyway.
    Sweep,
}

/// Round-trip sensing channel toward a point target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarTarget {
    /// α
    #[serde(with = "math::complex_serde")]
    pub gain: Complex64,
    /// θ (rad)
    pub direction: f64,
    /// n_s = round(τ B)
    pub delay_symbols: usize,
    /// τ (s)
    pub delay_seconds: f64,
    /// f_d = 2 v_d / λ (Hz)
    pub doppler: f64,
    /// v_d (m/s)
    pub radial_velocity: f64,
    /// R (m)
    pub range: f64,
    /// ξ (m²) when generated from geometry.
    pub rcs: Option<f64>,
}

impl RadarTarget {
    /// Target from geometry: `τ = 2R/c`, `n_s = round(τB)`, `f_d = 2v/λ`,
    /// `|α|² = λ²ξ/((4π)³R⁴)` with a uniformly random phase.
    pub fn from_geometry<R: Rng + ?Sized>(
        range: f64,
        radial_velocity: f64,
        rcs: f64,
        direction: f64,
        cfg: &ScenarioConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let lambda = cfg.wavelength();
        let power = radar_round_trip_gain(range, lambda, rcs)?;
        if !direction.is_finite() || !radial_velocity.is_finite() {
            return Err(Error::invalid(
                "target",
                "direction and velocity must be finite",
            ));
        }
        let tau = 2.0 * range / SPEED_OF_LIGHT;
        let phase = rng.random_range(0.0..2.0 * PI);
        Ok(RadarTarget {
            gain: Complex64::from_polar(power.sqrt(), phase),
            direction,
            delay_symbols: (tau * cfg.bandwidth).round() as usize,
            delay_seconds: tau,
            doppler: 2.0 * radial_velocity / lambda,
            radial_velocity,
            range,
            rcs: Some(rcs),
        })
    }

    /// Target from on-grid delay and Doppler; range and velocity derived.
    pub fn on_grid(
        gain: Complex64,
        direction: f64,
        delay_symbols: usize,
        doppler: f64,
        cfg: &ScenarioConfig,
    ) -> Self {
        let tau = delay_symbols as f64 * cfg.symbol_duration();
        RadarTarget {
            gain,
            direction,
            delay_symbols,
            delay_seconds: tau,
            doppler,
            radial_velocity: doppler * cfg.wavelength() / 2.0,
            range: SPEED_OF_LIGHT * tau / 2.0,
            rcs: None,
        }
    }

    pub fn gain_power(&self) -> f64 {
        self.gain.norm_sqr()
    }
}

/// `|α|² = λ²ξ / ((4π)³ R⁴)`
pub fn radar_round_trip_gain(range: f64, wavelength: f64, rcs: f64) -> Result<f64> {
    if !(range.is_finite() && range > 0.0) {
        return Err(Error::invalid(
            "range",
            format!("must be positive, got {range}"),
        ));
    }
    if !(rcs.is_finite() && rcs > 0.0) {
        return Err(Error::invalid(
            "rcs",
            format!("must be positive, got {rcs}"),
        ));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::invalid(
            "wavelength",
            format!("must be positive, got {wavelength}"),
        ));
    }
    Ok(wavelength * wavelength * rcs / ((4.0 * PI).powi(3) * range.powi(4)))
}

/// Echo row `y[n] = α a^H(θ) x[n - n_s] e^{j2π f_d n T_s} + z[n]`,
/// `n = 0..N`, with Doppler phase indexed from the first retained sample.
pub fn apply_radar_channel<R: Rng + ?Sized>(
    tgt: &RadarTarget,
    tx_block: &CMatrix,
    noise_power: f64,
    cfg: &ScenarioConfig,
    policy: DelayPolicy,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if tgt.delay_symbols > cfg.guard_length {
        match policy {
            DelayPolicy::Strict => {
                return Err(Error::AmbiguousDelay {
                    delay: tgt.delay_symbols,
                    guard: cfg.guard_length,
                })
            }
            DelayPolicy::Sweep => warn!(
                "target delay {} exceeds guard N_p = {}; inter-block ISI not modelled",
                tgt.delay_symbols, cfg.guard_length
            ),
        }
    }
    if !tgt.direction.is_finite() {
        return Err(Error::invalid("direction", "must be finite"));
    }
    let m = tx_block.nrows();
    let n = tx_block.ncols();
    let a = ula_response(tgt.direction, m, HALF_WAVELENGTH);
    let beam = a.adjoint() * tx_block;
    let step = 2.0 * PI * tgt.doppler * cfg.symbol_duration();
    let mut y: Vec<Complex64> = (0..n)
        .map(|k| {
            if k < tgt.delay_symbols {
                ZERO
            } else {
                tgt.gain * beam[k - tgt.delay_symbols] * phasor(step * k as f64)
            }
        })
        .collect();
    math::add_awgn(rng, &mut y, noise_power);
    Ok(y)
}
