//! DAM against the OFDM radar baseline: ambiguity limits, sensing SNR under
//! average and peak power constraints, PAPR, and a paired Doppler trial.

use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{Experiment, ExperimentConfig};
use super::{db, open_output, streams, target_alpha};
use crate::beamforming::isi_zf_mrt_beamformer;
use crate::channel::{
    apply_radar_channel, generate_multipath_channel, radar_round_trip_gain, steering, DelayPolicy,
    RadarTarget, ScenarioConfig,
};
use crate::error::Result;
use crate::math::{complex_gaussian, db_to_linear, stream_rng, CMatrix, SPEED_OF_LIGHT};
use crate::ofdm::{
    bin_noise_power, ofdm_ambiguity_limits, ofdm_delay_doppler_estimate, ofdm_matched_output,
    ofdm_output_snr, ofdm_radar_rx, ofdm_time_domain, peak_power_constrained_snr_comparison,
    sensing_beams, OfdmConfig, OfdmEcho, PeakPowerSetup,
};
use crate::sensing::{
    dam_ambiguity_limits, delay_doppler_map_full, empirical_snr, estimate_delay_doppler,
    matched_filter_template, sensing_snr,
};
use crate::waveform::{
    assign_delays, build_dam_block, generate_symbols, papr_empirical, papr_with_mode,
    transmit_power, DamBeamformer, Modulation, PaprMode,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scheme: &'static str,
    /// "average" or "peak"
    pub regime: &'static str,
    /// L for DAM, K for OFDM
    pub k_or_l: usize,
    /// N for DAM, I for OFDM (full scale)
    pub i_or_n: usize,
    /// Full-scale analytic SNR at the configured target.
    pub analytic_snr_db: f64,
    /// N or I of the reduced-scale Monte-Carlo run.
    pub empirical_i_or_n: usize,
    /// Analytic SNR of the reduced-scale run.
    pub empirical_analytic_snr_db: f64,
    pub empirical_snr_db: f64,
    pub max_range_m: f64,
    pub max_velocity_mps: f64,
    pub range_resolution_m: f64,
    pub velocity_resolution_mps: f64,
    pub max_delay_symbols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRatio {
    pub num_subcarriers: usize,
    pub num_paths: usize,
    pub cpi_length: usize,
    pub num_symbols: usize,
    /// N/(L I)
    pub analytic: f64,
    pub empirical: f64,
    pub dam_empirical_snr: f64,
    pub ofdm_empirical_snr: f64,
    pub dam_analytic_snr: f64,
    pub ofdm_analytic_snr: f64,
}

impl EmpiricalRatio {
    pub fn error_db(&self) -> f64 {
        (db(self.empirical) - db(self.analytic)).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaprRow {
    pub scheme: &'static str,
    pub k_or_l: usize,
    /// Array-aggregate PAPR against the empirical mean power.
    pub papr_empirical: f64,
    /// Largest single-antenna PAPR against its empirical mean power.
    pub papr_per_antenna: f64,
    /// `max_n ‖x[n]‖²` over the nominal mean power (`Σ‖f_l‖²` for DAM,
    /// `Σ‖w_k‖²/K` for OFDM).
    pub peak_to_nominal: f64,
    /// η_DAM = L, η_OFDM = K
    pub papr_nominal: f64,
}

fn peak_power(block: &CMatrix) -> f64 {
    block
        .column_iter()
        .map(|c| c.norm_squared())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerTrialOutcome {
    pub true_doppler: f64,
    pub dam_doppler: f64,
    pub ofdm_doppler: f64,
    pub dam_delay_ok: bool,
    /// `|f̂ − f_d|` within one DAM Doppler resolution cell.
    pub dam_ok: bool,
    /// `|f̂ − f_d| > Δf` for OFDM.
    pub ofdm_aliased: bool,
    pub dam_snr: f64,
}

/// `f_l = √(P/(ML)) a(θ)` with distinct pre-delays `κ = [L−1, …, 0]`.
fn dam_sensing_beamformer(
    num_antennas: usize,
    num_paths: usize,
    theta: f64,
    power: f64,
) -> Result<DamBeamformer> {
    let col =
        steering(theta, num_antennas).scale((power / (num_antennas * num_paths) as f64).sqrt());
    let beams = CMatrix::from_columns(&vec![col; num_paths]);
    let delays = assign_delays(&(0..num_paths).collect::<Vec<_>>())?;
    DamBeamformer::new(beams, delays)
}

fn noisy_draws(
    signal: Complex64,
    template: &[Complex64],
    noise: f64,
    trials: usize,
    seed: u64,
    stream: u64,
) -> Vec<Complex64> {
    (0..trials)
        .into_par_iter()
        .map(|d| {
            let mut r = stream_rng(seed, stream + d as u64);
            signal
                + template
                    .iter()
                    .map(|t| complex_gaussian(&mut r, noise) * t.conj())
                    .sum::<Complex64>()
        })
        .collect()
}

/// Monte-Carlo SNR of the DAM matched filter at the true cell.
fn dam_empirical_snr(
    scenario: &ScenarioConfig,
    bf: &DamBeamformer,
    tgt: &RadarTarget,
    trials: usize,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let mut rng = stream_rng(seed, stream);
    let sym = generate_symbols(&mut rng, scenario.cpi_length(), Modulation::QPSK)?;
    let block = build_dam_block(&sym, bf)?;
    let clean = apply_radar_channel(tgt, &block, 0.0, scenario, DelayPolicy::Strict, &mut rng)?;
    let template = matched_filter_template(
        bf,
        &sym,
        tgt.direction,
        tgt.delay_symbols,
        tgt.doppler,
        scenario.symbol_duration(),
    )?;
    let signal: Complex64 = clean.iter().zip(&template).map(|(y, t)| y * t.conj()).sum();
    let draws = noisy_draws(
        signal,
        &template,
        scenario.noise_power,
        trials,
        seed,
        stream + 1,
    );
    Ok(empirical_snr(&draws))
}

/// Monte-Carlo SNR of the OFDM matched accumulation over all `(k, i)`.
fn ofdm_empirical_snr(
    scenario: &ScenarioConfig,
    ocfg: &OfdmConfig,
    tgt: &RadarTarget,
    trials: usize,
    seed: u64,
    stream: u64,
) -> Result<f64> {
    let mut rng = stream_rng(seed, stream);
    let x = qpsk_grid(&mut rng, ocfg.num_subcarriers, ocfg.num_symbols)?;
    let clean = ofdm_radar_rx(ocfg, tgt, &x, 0.0, &mut rng)?;
    // Unit-norm template as a flat vector, matching the matched accumulation.
    let a = steering(tgt.direction, ocfg.num_antennas());
    let mut template = Vec::with_capacity(ocfg.num_subcarriers * ocfg.num_symbols);
    let unit = OfdmEcho {
        values: CMatrix::from_fn(ocfg.num_subcarriers, ocfg.num_symbols, |k, i| {
            a.dotc(&ocfg.beams.column(k))
                * x[(k, i)]
                * crate::math::phasor(
                    2.0 * std::f64::consts::PI
                        * i as f64
                        * ocfg.total_symbol_duration()
                        * tgt.doppler,
                )
                * crate::math::phasor(
                    -2.0 * std::f64::consts::PI
                        * k as f64
                        * ocfg.subcarrier_spacing()
                        * tgt.delay_seconds,
                )
        }),
        doppler_valid: true,
        delay_valid: true,
    };
    let norm = unit.values.norm();
    for i in 0..ocfg.num_symbols {
        for k in 0..ocfg.num_subcarriers {
            template.push(unit.values[(k, i)] / norm);
        }
    }
    let signal = ofdm_matched_output(&clean, ocfg, &x, tgt)?;
    let noise = bin_noise_power(scenario.noise_power, ocfg.num_subcarriers);
    let draws = noisy_draws(signal, &template, noise, trials, seed, stream + 1);
    Ok(empirical_snr(&draws))
}

fn qpsk_grid<R: rand::Rng + ?Sized>(rng: &mut R, k: usize, i: usize) -> Result<CMatrix> {
    let s = generate_symbols(rng, k * i, Modulation::QPSK)?;
    Ok(CMatrix::from_column_slice(k, i, s.symbols()))
}

/// Both schemes at average power `P_max/η` (η_DAM = L, η_OFDM = K) on the
/// scenario `scenario`, with SNRs measured by Monte-Carlo at the true cell.
#[allow(clippy::too_many_arguments)]
pub fn empirical_peak_power_ratio(
    scenario: &ScenarioConfig,
    num_subcarriers: usize,
    num_paths: usize,
    theta: f64,
    target_range: f64,
    rcs: f64,
    trials: usize,
    seed: u64,
) -> Result<EmpiricalRatio> {
    let p_max = scenario.transmit_power;
    let m = scenario.num_antennas;
    let alpha = Complex64::new(
        radar_round_trip_gain(target_range, scenario.wavelength(), rcs)?.sqrt(),
        0.0,
    );
    let delay = ((2.0 * target_range / SPEED_OF_LIGHT) * scenario.bandwidth).round() as usize;
    let tgt = RadarTarget::on_grid(alpha, theta, delay, 0.0, scenario);

    let bf = dam_sensing_beamformer(m, num_paths, theta, p_max / num_paths as f64)?;
    let n = scenario.cpi_length();
    let stream = streams::OFDM + ((num_subcarriers as u64) << 20);
    let dam_emp = dam_empirical_snr(scenario, &bf, &tgt, trials, seed, stream)?;
    let dam_an = sensing_snr(bf.beams(), theta, alpha, n, scenario.noise_power);

    let powers = vec![p_max / (num_subcarriers * num_subcarriers) as f64; num_subcarriers];
    let ocfg =
        OfdmConfig::from_scenario(scenario, num_subcarriers, sensing_beams(m, theta, &powers))?;
    let ofdm_emp = ofdm_empirical_snr(scenario, &ocfg, &tgt, trials, seed, stream + (1 << 16))?;
    let ofdm_an = ofdm_output_snr(&ocfg, theta, alpha, scenario.noise_power);
    Ok(EmpiricalRatio {
        num_subcarriers,
        num_paths,
        cpi_length: n,
        num_symbols: ocfg.num_symbols,
        analytic: n as f64 / (num_paths * ocfg.num_symbols) as f64,
        empirical: dam_emp / ofdm_emp,
        dam_empirical_snr: dam_emp,
        ofdm_empirical_snr: ofdm_emp,
        dam_analytic_snr: dam_an,
        ofdm_analytic_snr: ofdm_an,
    })
}

/// One paired trial at `f_d = 2Δf`: DAM (full Doppler span, delays
/// `0..=N_p`) and OFDM estimate the same target, with `|α|` set so that the
/// DAM sensing SNR equals `snr_db`.
#[allow(clippy::too_many_arguments)]
pub fn paired_doppler_trial(
    scenario: &ScenarioConfig,
    num_subcarriers: usize,
    num_paths: usize,
    theta: f64,
    snr_db: f64,
    seed: u64,
    trial: u64,
) -> Result<DopplerTrialOutcome> {
    let m = scenario.num_antennas;
    let n = scenario.cpi_length();
    let ts = scenario.symbol_duration();
    let p = scenario.transmit_power;
    let mut rng = stream_rng(seed, streams::OFDM + (1 << 36) + trial);

    let bf = dam_sensing_beamformer(m, num_paths, theta, p)?;
    let unit_snr = sensing_snr(
        bf.beams(),
        theta,
        Complex64::new(1.0, 0.0),
        n,
        scenario.noise_power,
    );
    let magnitude = (db_to_linear(snr_db) / unit_snr).sqrt();
    let phase = rand::Rng::random_range(&mut rng, 0.0..2.0 * std::f64::consts::PI);
    let alpha = Complex64::from_polar(magnitude, phase);

    let ocfg = OfdmConfig::sensing_only(scenario, num_subcarriers, theta)?;
    let fd = 2.0 * ocfg.subcarrier_spacing();
    let delay = scenario.guard_length.min(num_subcarriers - 1) / 2;
    let tgt = RadarTarget::on_grid(alpha, theta, delay, fd, scenario);

    let sym = generate_symbols(&mut rng, n, Modulation::QPSK)?;
    let block = build_dam_block(&sym, &bf)?;
    let echo = apply_radar_channel(
        &tgt,
        &block,
        scenario.noise_power,
        scenario,
        DelayPolicy::Strict,
        &mut rng,
    )?;
    let map = delay_doppler_map_full(
        &echo,
        &bf,
        &sym,
        theta,
        (0..=scenario.guard_length).collect(),
        ts,
    )?;
    let dam = estimate_delay_doppler(&map)?;
    let resolution = 1.0 / (n as f64 * ts);

    let x = qpsk_grid(&mut rng, num_subcarriers, ocfg.num_symbols)?;
    let oecho = ofdm_radar_rx(
        &ocfg,
        &tgt,
        &x,
        bin_noise_power(scenario.noise_power, num_subcarriers),
        &mut rng,
    )?;
    let ofdm = ofdm_delay_doppler_estimate(&oecho, &ocfg, &x)?;

    Ok(DopplerTrialOutcome {
        true_doppler: fd,
        dam_doppler: dam.doppler,
        ofdm_doppler: ofdm.doppler,
        dam_delay_ok: dam.delay_bin == delay,
        dam_ok: dam.delay_bin == delay && (dam.doppler - fd).abs() <= resolution * (1.0 + 1e-9),
        ofdm_aliased: (ofdm.doppler - fd).abs() > ocfg.subcarrier_spacing(),
        dam_snr: sensing_snr(bf.beams(), theta, alpha, n, scenario.noise_power),
    })
}

/// Empirical PAPR of PSK OFDM (`K` subcarriers, CP `N_p`, `I` symbols) and of
/// DAM with ISI-ZF MRT beamformers on random channels with `L` paths.
pub fn papr_comparison(
    scenario: &ScenarioConfig,
    subcarriers: &[usize],
    path_counts: &[usize],
    theta: f64,
    seed: u64,
) -> Result<Vec<PaprRow>> {
    let mut rows = Vec::new();
    for &k in subcarriers {
        let mut rng = stream_rng(seed, streams::OFDM + (2 << 36) + k as u64);
        let ocfg = OfdmConfig::sensing_only(scenario, k, theta)?;
        let x = qpsk_grid(&mut rng, k, ocfg.num_symbols)?;
        let td = ofdm_time_domain(&ocfg.beams, &x, ocfg.cp_length.min(k))?;
        rows.push(PaprRow {
            scheme: "OFDM",
            k_or_l: k,
            papr_empirical: papr_empirical(&td)?,
            papr_per_antenna: papr_with_mode(&td, PaprMode::PerAntenna)?,
            peak_to_nominal: peak_power(&td) * k as f64 / ocfg.total_power(),
            papr_nominal: k as f64,
        });
    }
    for &l in path_counts {
        let mut rng = stream_rng(seed, streams::OFDM + (3 << 36) + l as u64);
        let gen = crate::channel::ChannelGenConfig::mmwave(l);
        let ch = generate_multipath_channel(scenario, &gen, &mut rng)?;
        let bf = isi_zf_mrt_beamformer(&ch, scenario.transmit_power)?;
        let sym = generate_symbols(&mut rng, scenario.cpi_length(), Modulation::QPSK)?;
        let block = build_dam_block(&sym, &bf)?;
        rows.push(PaprRow {
            scheme: "DAM",
            k_or_l: l,
            papr_empirical: papr_empirical(&block)?,
            papr_per_antenna: papr_with_mode(&block, PaprMode::PerAntenna)?,
            peak_to_nominal: peak_power(&block) / transmit_power(&bf),
            papr_nominal: l as f64,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmCompareResult {
    pub rows: Vec<ComparisonRow>,
    pub ratios: Vec<EmpiricalRatio>,
    pub papr: Vec<PaprRow>,
    pub doppler_trials: Vec<DopplerTrialOutcome>,
    pub doppler_subcarriers: usize,
}

impl OfdmCompareResult {
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        let scenario = cfg.scenario()?;
        let mut paths = Vec::new();

        let (path, file) = open_output(
            dir,
            "ofdm_compare.csv",
            cfg,
            Experiment::OfdmCompare,
            &scenario,
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "scheme",
            "regime",
            "k_or_l",
            "i_or_n",
            "analytic_snr_db",
            "empirical_i_or_n",
            "empirical_analytic_snr_db",
            "empirical_snr_db",
            "max_range_m",
            "max_velocity_mps",
            "range_resolution_m",
            "velocity_resolution_mps",
            "max_delay_symbols",
        ])?;
        for r in &self.rows {
            w.write_record(&[
                r.scheme.to_string(),
                r.regime.to_string(),
                r.k_or_l.to_string(),
                r.i_or_n.to_string(),
                format!("{:.6}", r.analytic_snr_db),
                r.empirical_i_or_n.to_string(),
                format!("{:.6}", r.empirical_analytic_snr_db),
                format!("{:.6}", r.empirical_snr_db),
                format!("{:.6}", r.max_range_m),
                format!("{:.6}", r.max_velocity_mps),
                format!("{:.6}", r.range_resolution_m),
                format!("{:.9}", r.velocity_resolution_mps),
                r.max_delay_symbols.to_string(),
            ])?;
        }
        w.flush()?;
        paths.push(path);

        let (path, file) = open_output(
            dir,
            "ofdm_peak_ratio.csv",
            cfg,
            Experiment::OfdmCompare,
            &scenario,
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "K",
            "L",
            "N",
            "I",
            "analytic_ratio_db",
            "empirical_ratio_db",
            "error_db",
        ])?;
        for r in &self.ratios {
            w.write_record(&[
                r.num_subcarriers.to_string(),
                r.num_paths.to_string(),
                r.cpi_length.to_string(),
                r.num_symbols.to_string(),
                format!("{:.6}", db(r.analytic)),
                format!("{:.6}", db(r.empirical)),
                format!("{:.6}", r.error_db()),
            ])?;
        }
        w.flush()?;
        paths.push(path);

        let (path, file) = open_output(
            dir,
            "ofdm_papr.csv",
            cfg,
            Experiment::OfdmCompare,
            &scenario,
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "scheme",
            "k_or_l",
            "papr_empirical_db",
            "papr_per_antenna_db",
            "peak_to_nominal_db",
            "papr_nominal_db",
        ])?;
        for r in &self.papr {
            w.write_record(&[
                r.scheme.to_string(),
                r.k_or_l.to_string(),
                format!("{:.6}", db(r.papr_empirical)),
                format!("{:.6}", db(r.papr_per_antenna)),
                format!("{:.6}", db(r.peak_to_nominal)),
                format!("{:.6}", db(r.papr_nominal)),
            ])?;
        }
        w.flush()?;
        paths.push(path);

        let (path, mut file) = open_output(
            dir,
            "ofdm_doppler_trials.csv",
            cfg,
            Experiment::OfdmCompare,
            &scenario,
        )?;
        let dam_ok = self.doppler_trials.iter().filter(|t| t.dam_ok).count();
        let aliased = self
            .doppler_trials
            .iter()
            .filter(|t| t.ofdm_aliased)
            .count();
        writeln!(
            file,
            "# K = {}, DAM within one bin: {}/{}, OFDM error above subcarrier spacing: {}/{}",
            self.doppler_subcarriers,
            dam_ok,
            self.doppler_trials.len(),
            aliased,
            self.doppler_trials.len()
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "trial",
            "true_doppler_hz",
            "dam_doppler_hz",
            "ofdm_doppler_hz",
            "dam_ok",
            "ofdm_aliased",
            "dam_snr_db",
        ])?;
        for (i, t) in self.doppler_trials.iter().enumerate() {
            w.write_record(&[
                i.to_string(),
                format!("{:.3}", t.true_doppler),
                format!("{:.3}", t.dam_doppler),
                format!("{:.3}", t.ofdm_doppler),
                t.dam_ok.to_string(),
                t.ofdm_aliased.to_string(),
                format!("{:.4}", db(t.dam_snr)),
            ])?;
        }
        w.flush()?;
        paths.push(path);
        Ok(paths)
    }
}

pub fn run_ofdm_compare(cfg: &ExperimentConfig) -> Result<OfdmCompareResult> {
    let full = cfg.scenario()?;
    let reduced = cfg.waveform_scenario()?;
    let oc = &cfg.ofdm_compare;
    let theta = cfg.target_direction();
    let l = cfg.channel.num_paths;
    let m = full.num_antennas;
    let alpha = target_alpha(cfg, &full)?;
    let p_max = full.transmit_power;
    let dam_lim = dam_ambiguity_limits(&full);

    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &k in &oc.subcarriers {
        let ocfg = OfdmConfig::sensing_only(&full, k, theta)?;
        let cmp = peak_power_constrained_snr_comparison(&PeakPowerSetup {
            num_antennas: m,
            cpi_length: full.cpi_length(),
            num_paths: l,
            num_symbols: ocfg.num_symbols,
            num_subcarriers: k,
            peak_power: p_max,
            alpha,
            noise_power: full.noise_power,
        });
        let ratio = empirical_peak_power_ratio(
            &reduced,
            k,
            l,
            theta,
            oc.empirical_range_m,
            cfg.target.rcs_m2,
            oc.snr_trials,
            cfg.seed,
        )?;
        // Average-power empirical OFDM run at the reduced scale.
        let reduced_ocfg = OfdmConfig::sensing_only(&reduced, k, theta)?;
        let emp_alpha = Complex64::new(
            radar_round_trip_gain(
                oc.empirical_range_m,
                reduced.wavelength(),
                cfg.target.rcs_m2,
            )?
            .sqrt(),
            0.0,
        );
        let delay =
            ((2.0 * oc.empirical_range_m / SPEED_OF_LIGHT) * reduced.bandwidth).round() as usize;
        let tgt = RadarTarget::on_grid(emp_alpha, theta, delay, 0.0, &reduced);
        let stream = streams::OFDM + (4 << 36) + ((k as u64) << 20);
        let avg_emp = ofdm_empirical_snr(
            &reduced,
            &reduced_ocfg,
            &tgt,
            oc.snr_trials,
            cfg.seed,
            stream,
        )?;
        let avg_an = ofdm_output_snr(&reduced_ocfg, theta, emp_alpha, reduced.noise_power);

        let lim = ofdm_ambiguity_limits(&ocfg);
        for (regime, analytic, emp_an, emp) in [
            ("average", cmp.ofdm_average, avg_an, avg_emp),
            (
                "peak",
                cmp.ofdm_peak,
                ratio.ofdm_analytic_snr,
                ratio.ofdm_empirical_snr,
            ),
        ] {
            rows.push(ComparisonRow {
                scheme: "OFDM",
                regime,
                k_or_l: k,
                i_or_n: ocfg.num_symbols,
                analytic_snr_db: db(analytic),
                empirical_i_or_n: reduced_ocfg.num_symbols,
                empirical_analytic_snr_db: db(emp_an),
                empirical_snr_db: db(emp),
                max_range_m: lim.max_range,
                max_velocity_mps: lim.max_velocity,
                range_resolution_m: lim.range_resolution,
                velocity_resolution_mps: lim.velocity_resolution,
                max_delay_symbols: lim.max_delay_symbols,
            });
        }
        ratios.push(ratio);
    }

    // DAM rows: average power P, and peak-derated P/L (taken from the first ratio run).
    let bf = dam_sensing_beamformer(m, l, theta, p_max)?;
    let emp_alpha = Complex64::new(
        radar_round_trip_gain(
            oc.empirical_range_m,
            reduced.wavelength(),
            cfg.target.rcs_m2,
        )?
        .sqrt(),
        0.0,
    );
    let delay =
        ((2.0 * oc.empirical_range_m / SPEED_OF_LIGHT) * reduced.bandwidth).round() as usize;
    let tgt = RadarTarget::on_grid(emp_alpha, theta, delay, 0.0, &reduced);
    let avg_emp = dam_empirical_snr(
        &reduced,
        &bf,
        &tgt,
        oc.snr_trials,
        cfg.seed,
        streams::OFDM + (5 << 36),
    )?;
    let avg_an = sensing_snr(
        bf.beams(),
        theta,
        emp_alpha,
        reduced.cpi_length(),
        reduced.noise_power,
    );
    let full_avg = sensing_snr(
        bf.beams(),
        theta,
        alpha,
        full.cpi_length(),
        full.noise_power,
    );
    let first = ratios[0];
    for (regime, analytic, emp_an, emp) in [
        ("average", full_avg, avg_an, avg_emp),
        (
            "peak",
            full_avg / l as f64,
            first.dam_analytic_snr,
            first.dam_empirical_snr,
        ),
    ] {
        rows.push(ComparisonRow {
            scheme: "DAM",
            regime,
            k_or_l: l,
            i_or_n: full.cpi_length(),
            analytic_snr_db: db(analytic),
            empirical_i_or_n: reduced.cpi_length(),
            empirical_analytic_snr_db: db(emp_an),
            empirical_snr_db: db(emp),
            max_range_m: dam_lim.max_range,
            max_velocity_mps: dam_lim.max_velocity,
            range_resolution_m: dam_lim.range_resolution,
            velocity_resolution_mps: dam_lim.velocity_resolution,
            max_delay_symbols: dam_lim.max_delay_symbols,
        });
    }

    let papr = papr_comparison(&reduced, &oc.subcarriers, &[2, 4, 8], theta, cfg.seed)?;
    let k_min = *oc.subcarriers.iter().min().expect("validated non-empty");
    let doppler_trials = (0..oc.doppler_trials as u64)
        .into_par_iter()
        .map(|t| {
            paired_doppler_trial(
                &reduced,
                k_min,
                l,
                theta,
                oc.doppler_trial_snr_db,
                cfg.seed,
                t,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OfdmCompareResult {
        rows,
        ratios,
        papr,
        doppler_trials,
        doppler_subcarriers: k_min,
    })
}
