//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{c, channel, cmat, cvec, qpsk, random_search_optimum, rel_err, scenario};
use damisac::beamforming::{
    isi_zf_mrt_beamformer, nullspace_projector, sca_optimize, sca_optimize_from,
    sensing_only_zf_beamformer, IsacProblem, IsacSolution, ScaOptions,
};
use damisac::channel::{
    apply_radar_channel, steering, DelayPolicy, MultipathChannel, RadarTarget, ScenarioConfig,
};
use damisac::experiment::{
    empirical_peak_power_ratio, paired_doppler_trial, papr_comparison, run_beampattern,
    run_se_sweep, ExperimentConfig,
};
use damisac::math::{dbm_to_watts, linear_to_db, stream_rng, CMatrix, CVector};
use damisac::ofdm::{peak_power_constrained_snr_comparison, OfdmConfig, PeakPowerSetup};
use damisac::sensing::{
    correlation_matrix, dam_ambiguity_limits, empirical_snr, matched_filter_template,
    max_sensing_snr, sensing_snr, SensingBudget,
};
use damisac::waveform::{assign_delays, build_dam_block, DamBeamformer};
use num_complex::Complex64;
use rand::seq::index::sample;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit_budget() -> SensingBudget {
    SensingBudget::new(c(1.0), 1, 1.0)
}

/// `max_{l≠l'} |h_l^H f_l'| / (max_l ‖h_l‖ · ‖f_l'‖)`, from the raw vectors.
fn zf_residual(ch: &MultipathChannel, beams: &CMatrix) -> f64 {
    let l = ch.num_paths();
    let h_max = (0..l).map(|i| ch.path_vector(i).norm()).fold(0.0, f64::max);
    let mut worst = 0f64;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                let f = beams.column(j);
                let leak = ch.path_vector(i).dotc(&f).norm();
                worst = worst.max(leak / (h_max * f.norm()));
            }
        }
    }
    worst
}

fn nondecreasing(trajectory: &[f64]) -> bool {
    trajectory.windows(2).all(|w| w[1] >= w[0])
}

fn criterion_1() -> Outcome {
    let cfg = ScenarioConfig::from_times(
        64,
        100e6,
        28e9,
        1e-3,
        2e-6,
        dbm_to_watts(30.0),
        dbm_to_watts(-169.0) * 100e6,
    )
    .unwrap();
    let lim = dam_ambiguity_limits(&cfg);
    let ts = cfg.symbol_duration();
    let pass = rel_err(ts, 10e-9) < 1e-12
        && rel_err(lim.range_resolution, 1.5) < 1e-12
        && rel_err(lim.max_range, 300.0) < 1e-12
        && cfg.guard_length == 200
        && cfg.block_length == 100_000
        && cfg.cpi_length() == 99_800;
    outcome(
        pass,
        format!(
            "T_s = {ts:e} s, dR = {} m, R_ua = {} m, N_p = {}, N_c = {}, N = {}",
            lim.range_resolution,
            lim.max_range,
            cfg.guard_length,
            cfg.block_length,
            cfg.cpi_length()
        ),
    )
}

fn mean_off_diagonal(n: usize, seeds: u64) -> f64 {
    let total: f64 = (0..seeds)
        .map(|seed| {
            let mut rng = stream_rng(seed, 2);
            let mut path_delays: Vec<usize> = sample(&mut rng, 64, 5).into_iter().collect();
            path_delays.sort_unstable();
            let kappa = assign_delays(&path_delays).unwrap();
            let sym = qpsk(seed, n);
            correlation_matrix(&sym, &kappa, 17, 17).max_off_diagonal_normalized()
        })
        .sum();
    total / seeds as f64
}

fn criterion_2() -> Outcome {
    let sizes = [256, 1024, 4096, 16384];
    let means: Vec<f64> = sizes.iter().map(|&n| mean_off_diagonal(n, 100)).collect();
    let at_4096 = means[2];
    let bound = 4.0 / 4096f64.sqrt();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    outcome(
        at_4096 <= bound && decreasing,
        format!(
            "mean max|Lambda_ij|/N at N = {sizes:?}: {:.4?}; bound at 4096 = {bound:.4}",
            means
        ),
    )
}

/// Peak-cell SNR over `draws` noise realizations against the analytic value.
fn peak_cell_snr_error_db(bf: &DamBeamformer, seed: u64, draws: usize) -> (f64, f64) {
    let n = 4096;
    let cfg = scenario(16, 200, n);
    let theta = 30f64.to_radians();
    let sigma2 = 1.0;
    let unit = sensing_snr(bf.beams(), theta, c(1.0), n, sigma2);
    let alpha = Complex64::from_polar((10.0 / unit).sqrt(), 0.7);
    let analytic = sensing_snr(bf.beams(), theta, alpha, n, sigma2);
    let sym = qpsk(seed, n);
    let block = build_dam_block(&sym, bf).unwrap();
    let ts = cfg.symbol_duration();
    let doppler = 5.0 / (n as f64 * ts);
    let tgt = RadarTarget::on_grid(alpha, theta, 37, doppler, &cfg);
    let template = matched_filter_template(bf, &sym, theta, 37, doppler, ts).unwrap();
    let mut rng = stream_rng(seed, 3);
    let outputs: Vec<Complex64> = (0..draws)
        .map(|_| {
            let y = apply_radar_channel(&tgt, &block, sigma2, &cfg, DelayPolicy::Strict, &mut rng)
                .unwrap();
            y.iter().zip(&template).map(|(y, t)| y * t.conj()).sum()
        })
        .collect();
    let measured = empirical_snr(&outputs);
    (linear_to_db(measured / analytic), linear_to_db(analytic))
}

fn criterion_3() -> Outcome {
    let (m, l) = (16, 3);
    let ch = channel(30, m, l);
    let mut rng = stream_rng(30, 4);
    let random = cmat(&mut rng, m, l);
    let random = random.scale(1.0 / random.norm());
    let random_bf = DamBeamformer::for_channel(random, &ch).unwrap();
    let (err_random, snr_random) = peak_cell_snr_error_db(&random_bf, 31, 500);

    let theta = 30f64.to_radians();
    let col = steering(theta, m).scale((1.0 / (m * l) as f64).sqrt());
    let beam = DamBeamformer::for_channel(CMatrix::from_columns(&vec![col; l]), &ch).unwrap();
    let closed = max_sensing_snr(m, 4096, 1.0, c(1.0), 1.0);
    let via_sum = sensing_snr(beam.beams(), theta, c(1.0), 4096, 1.0);
    let (err_max, snr_max) = peak_cell_snr_error_db(&beam, 32, 500);
    let pass = err_random.abs() <= 0.5 && err_max.abs() <= 0.5 && rel_err(via_sum, closed) < 1e-9;
    outcome(
        pass,
        format!(
            "random F: {err_random:+.3} dB off {snr_random:.2} dB; \
             max beam: {err_max:+.3} dB off {snr_max:.2} dB (|a|^2 N M P / s2 match {:.1e})",
            rel_err(via_sum, closed)
        ),
    )
}

struct ZfRuns {
    worst: f64,
    beamformers: usize,
    trajectories: Vec<Vec<f64>>,
}

fn criterion_4(runs: &mut ZfRuns) -> Outcome {
    let theta = 30f64.to_radians();
    let budget = unit_budget();
    let opts = ScaOptions::default();
    for &l in &[5usize, 10] {
        for seed in 0..100u64 {
            let ch = channel(4000 + seed * 16 + l as u64, 64, l);
            let mrt = isi_zf_mrt_beamformer(&ch, 1.0).unwrap();
            let sens = sensing_only_zf_beamformer(&ch, theta, 1.0, &budget).unwrap();
            let sol =
                sca_optimize(&ch, theta, &budget, 0.5 * sens.gamma_zf_max, 1.0, &opts).unwrap();
            for beams in [mrt.beams(), sens.beamformer.beams(), sol.beamformer.beams()] {
                runs.worst = runs.worst.max(zf_residual(&ch, beams));
                runs.beamformers += 1;
            }
            runs.trajectories
                .push(sol.report.objective_trajectory.clone());
        }
    }
    outcome(
        runs.worst <= 1e-6,
        format!(
            "worst relative leakage {:.2e} over {} beamformers (M = 64, L = 5, 10)",
            runs.worst, runs.beamformers
        ),
    )
}

fn random_warm_start(ch: &MultipathChannel, seed: u64) -> DamBeamformer {
    let mut rng = stream_rng(seed, 5);
    DamBeamformer::for_channel(cmat(&mut rng, ch.num_antennas(), ch.num_paths()), ch).unwrap()
}

fn criterion_5(runs: &mut ZfRuns) -> Outcome {
    let theta = 30f64.to_radians();
    let budget = unit_budget();
    let opts = ScaOptions::default();

    let mut zero_worst = 0f64;
    for &l in &[5usize, 10] {
        for seed in 0..20u64 {
            let ch = channel(5000 + seed * 16 + l as u64, 64, l);
            let sol = sca_optimize(&ch, theta, &budget, 0.0, 1.0, &opts).unwrap();
            let mrt = isi_zf_mrt_beamformer(&ch, 1.0).unwrap();
            let h = ch.matrix();
            let mrt_gain: Complex64 = (0..l)
                .map(|i| h.column(i).dotc(&mrt.beams().column(i)))
                .sum();
            zero_worst = zero_worst.max(rel_err(sol.comm_snr, mrt_gain.norm_sqr()));
            runs.trajectories.push(sol.report.objective_trajectory);
        }
    }

    let mut small_worst = 0f64;
    for seed in 0..20u64 {
        let ch = channel(6000 + seed, 4, 2);
        let zf = sensing_only_zf_beamformer(&ch, theta, 1.0, &budget)
            .unwrap()
            .gamma_zf_max;
        let gamma = 0.5 * zf;
        let sol = sca_optimize(&ch, theta, &budget, gamma, 1.0, &opts).unwrap();
        let problem = IsacProblem::new(&ch, theta, &budget, gamma, 1.0).unwrap();
        let mut oracle = random_search_optimum(&ch, &problem, 20_000, seed);
        for start in 0..50u64 {
            let warm = random_warm_start(&ch, seed * 1000 + start);
            let multi: IsacSolution =
                sca_optimize_from(&ch, theta, &budget, gamma, 1.0, &opts, &warm).unwrap();
            if multi.is_feasible() {
                oracle = oracle.max(multi.comm_snr);
            }
            runs.trajectories.push(multi.report.objective_trajectory);
        }
        small_worst = small_worst.max(rel_err(sol.comm_snr, oracle));
        runs.trajectories.push(sol.report.objective_trajectory);
    }

    let monotone = runs.trajectories.iter().all(|t| nondecreasing(t));
    outcome(
        monotone && zero_worst <= 0.01 && small_worst <= 0.02,
        format!(
            "(a) {} trajectories monotone: {monotone}; (b) gamma_th = 0 vs MRT: {:.2e}; \
             (c) M = 4, L = 2 vs search oracle: worst {:.3}%",
            runs.trajectories.len(),
            zero_worst,
            100.0 * small_worst
        ),
    )
}

fn matches_truth(peaks: &[f64], truth: &[f64]) -> bool {
    peaks.len() == truth.len()
        && truth
            .iter()
            .all(|t| peaks.iter().any(|p| (p - t).abs() <= 1.0))
}

fn criterion_6() -> Outcome {
    let cfg = ExperimentConfig::default();
    let r = run_beampattern(&cfg).unwrap();
    let aods = cfg.beampattern.path_aods_deg.clone();
    let target = cfg.target.direction_deg;
    let mut isac_truth = aods.clone();
    isac_truth.push(target);
    let comm_ok = matches_truth(&r.comm_peaks_deg, &aods)
        && !r.comm_peaks_deg.iter().any(|p| (p - target).abs() <= 1.0);
    let sens_ok = matches_truth(&r.sensing_peaks_deg, &[target]);
    let isac_ok = matches_truth(&r.isac_peaks_deg, &isac_truth);
    outcome(
        comm_ok && sens_ok && isac_ok,
        format!(
            "comm-only {:?}, sensing-only {:?}, ISAC {:?}",
            r.comm_peaks_deg, r.sensing_peaks_deg, r.isac_peaks_deg
        ),
    )
}

fn criterion_7() -> Outcome {
    let cfg = ExperimentConfig::default();
    let r = run_se_sweep(&cfg).unwrap();
    let mut monotone = true;
    for &l in &r.num_paths {
        let series: Vec<f64> = r
            .series(l)
            .iter()
            .filter(|row| row.feasible > 0)
            .map(|row| row.mean_se)
            .collect();
        monotone &= series.windows(2).all(|w| w[1] <= w[0]);
    }
    let grid = r.common_feasible_grid();
    let at = |l: usize, g: f64| {
        r.rows
            .iter()
            .find(|row| row.num_paths == l && row.gamma_th_db == g)
            .map(|row| row.mean_se)
            .unwrap()
    };
    let margins: Vec<f64> = grid.iter().map(|&g| at(5, g) - at(10, g)).collect();
    let ordered = !grid.is_empty() && margins.iter().all(|&d| d > 0.0);
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        monotone && ordered,
        format!(
            "{} realizations; monotone: {monotone}; common grid {:?} dB; \
             min SE(L=5) - SE(L=10) = {min_margin:.4} bps/Hz",
            r.trials, grid
        ),
    )
}

fn criterion_8a() -> Outcome {
    let cfg = ExperimentConfig::default();
    let full = cfg.scenario().unwrap();
    let reduced = cfg.waveform_scenario().unwrap();
    let theta = cfg.target_direction();
    let l = cfg.channel.num_paths;
    let mut exact_worst = 0f64;
    let mut errors = Vec::new();
    for &k in &[64usize, 256, 1024] {
        let i = full.block_length / (k + full.guard_length);
        let ocfg = OfdmConfig::sensing_only(&full, k, theta).unwrap();
        let cmp = peak_power_constrained_snr_comparison(&PeakPowerSetup {
            num_antennas: full.num_antennas,
            cpi_length: full.cpi_length(),
            num_paths: l,
            num_symbols: ocfg.num_symbols,
            num_subcarriers: k,
            peak_power: full.transmit_power,
            alpha: Complex64::new(1e-7, 2e-7),
            noise_power: full.noise_power,
        });
        let expected = full.cpi_length() as f64 / (l * i) as f64;
        exact_worst = exact_worst.max(rel_err(cmp.peak_ratio, expected));
        let emp = empirical_peak_power_ratio(
            &reduced,
            k,
            l,
            theta,
            cfg.ofdm_compare.empirical_range_m,
            cfg.target.rcs_m2,
            2000,
            cfg.seed,
        )
        .unwrap();
        errors.push(emp.error_db());
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    outcome(
        exact_worst < 1e-12 && worst <= 1.0,
        format!(
            "analytic N/(LI) rel err {exact_worst:.1e}; empirical ratio error at N = {} \
             for K = 64, 256, 1024: {:.3?} dB",
            reduced.cpi_length(),
            errors
        ),
    )
}

fn criterion_8b() -> Outcome {
    let scn = scenario(64, 16, 4096);
    let theta = 30f64.to_radians();
    let outcomes: Vec<_> = (0..100u64)
        .map(|t| paired_doppler_trial(&scn, 64, 5, theta, 20.0, 8, t).unwrap())
        .collect();
    let dam = outcomes.iter().filter(|o| o.dam_ok).count();
    let ofdm = outcomes.iter().filter(|o| o.ofdm_aliased).count();
    outcome(
        dam >= 95 && ofdm >= 95,
        format!(
            "K = 64, N_p = 16, N = 4096, f_d = 2 df at 20 dB: DAM within one bin {dam}/100, \
             OFDM aliased {ofdm}/100"
        ),
    )
}

fn criterion_8c() -> Outcome {
    let cfg = ExperimentConfig::default();
    let reduced = cfg.waveform_scenario().unwrap();
    let theta = cfg.target_direction();
    let mut pass = true;
    let mut ofdm_min = f64::INFINITY;
    let mut dam_max = 0f64;
    let mut dam_over_l = 0f64;
    for seed in 0..5u64 {
        let rows = papr_comparison(&reduced, &[64, 256, 1024], &[2, 4, 8], theta, seed).unwrap();
        let ofdm = rows
            .iter()
            .filter(|r| r.scheme == "OFDM")
            .map(|r| r.papr_empirical);
        let dam: Vec<_> = rows.iter().filter(|r| r.scheme == "DAM").collect();
        let seed_ofdm_min = ofdm.fold(f64::INFINITY, f64::min);
        let seed_dam_max = dam.iter().map(|r| r.papr_empirical).fold(0.0, f64::max);
        pass &= seed_ofdm_min > seed_dam_max;
        for r in &dam {
            dam_over_l = dam_over_l.max(r.papr_empirical / r.k_or_l as f64);
            pass &= r.papr_empirical <= r.k_or_l as f64;
        }
        ofdm_min = ofdm_min.min(seed_ofdm_min);
        dam_max = dam_max.max(seed_dam_max);
    }
    outcome(
        pass,
        format!(
            "5 seeds: min OFDM PAPR {:.2} dB, max DAM PAPR {:.2} dB, max DAM PAPR / L {:.3}",
            linear_to_db(ofdm_min),
            linear_to_db(dam_max),
            dam_over_l
        ),
    )
}

fn projector_errors(ch: &MultipathChannel) -> f64 {
    let l = ch.num_paths();
    let h_max = (0..l).map(|i| ch.path_vector(i).norm()).fold(0.0, f64::max);
    let mut worst = 0f64;
    for i in 0..l {
        let q = nullspace_projector(ch, i).unwrap();
        worst = worst.max((&q * &q - &q).norm());
        worst = worst.max((&q - q.adjoint()).norm());
        for j in (0..l).filter(|&j| j != i) {
            let leak = ch.path_vector(j).adjoint() * &q;
            worst = worst.max(leak.norm() / h_max);
        }
    }
    worst
}

fn directional_derivative(f: impl Fn(&CVector) -> f64, b: &CVector, v: &CVector) -> f64 {
    let t = 1e-4 * b.norm() / v.norm();
    (f(&(b + v.scale(t))) - f(&(b - v.scale(t)))) / (2.0 * t)
}

fn criterion_9() -> Outcome {
    let theta = 30f64.to_radians();
    let budget = unit_budget();
    let mut projector_worst = 0f64;
    let mut zf_violations = 0;
    for seed in 0..100u64 {
        for &l in &[5usize, 10] {
            let ch = channel(9000 + seed * 16 + l as u64, 64, l);
            projector_worst = projector_worst.max(projector_errors(&ch));
            let zf = sensing_only_zf_beamformer(&ch, theta, 1.0, &budget)
                .unwrap()
                .gamma_zf_max;
            if zf > max_sensing_snr(64, 1, 1.0, c(1.0), 1.0) * (1.0 + 1e-12) {
                zf_violations += 1;
            }
        }
    }
    let single = channel(9999, 64, 1);
    let single_zf = sensing_only_zf_beamformer(&single, theta, 1.0, &budget)
        .unwrap()
        .gamma_zf_max;
    let single_err = rel_err(single_zf, max_sensing_snr(64, 1, 1.0, c(1.0), 1.0));

    let ch = channel(77, 8, 3);
    let problem = IsacProblem::new(&ch, theta, &budget, 0.5, 1.0).unwrap();
    let mut rng = stream_rng(77, 9);
    let mut bound_violations = 0;
    let mut tangency = 0f64;
    let mut gradient = 0f64;
    for _ in 0..1000 {
        let at = problem.project(&cvec(&mut rng, problem.dim()));
        let b = problem.project(&cvec(&mut rng, problem.dim()));
        let slack = 1e-12 * (problem.objective(&b) + problem.objective(&at)).max(1e-300);
        if problem.objective_lower_bound(&b, &at) > problem.objective(&b) + slack {
            bound_violations += 1;
        }
        let slack = 1e-12 * (problem.sensing(&b) + problem.sensing(&at)).max(1e-300);
        if problem.sensing_lower_bound(&b, &at) > problem.sensing(&b) + slack {
            bound_violations += 1;
        }
        tangency = tangency
            .max(rel_err(
                problem.objective_lower_bound(&at, &at),
                problem.objective(&at),
            ))
            .max(rel_err(
                problem.sensing_lower_bound(&at, &at),
                problem.sensing(&at),
            ));
        let v = cvec(&mut rng, problem.dim());
        let fd = directional_derivative(|x| problem.objective(x), &at, &v);
        let an = problem.objective_gradient(&at).dotc(&v).re;
        gradient = gradient.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-300));
        let fd = directional_derivative(|x| problem.sensing(x), &at, &v);
        let an = problem.sensing_gradient(&at).dotc(&v).re;
        gradient = gradient.max((fd - an).abs() / an.abs().max(fd.abs()).max(1e-300));
    }
    let pass = projector_worst <= 1e-10
        && zf_violations == 0
        && single_err < 1e-10
        && bound_violations == 0
        && tangency < 1e-10
        && gradient <= 1e-5;
    outcome(
        pass,
        format!(
            "projector residual {projector_worst:.1e}; gamma_zf > gamma_p,max in {zf_violations}/200; \
             L = 1 equality {single_err:.1e}; bound violations {bound_violations}/2000; \
             tangency {tangency:.1e}; gradient vs finite difference {gradient:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let mut zf_runs = ZfRuns {
        worst: 0.0,
        beamformers: 0,
        trajectories: Vec::new(),
    };
    let mut failures = 0;
    let mut report = |id: &str, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failures += 1;
        }
        println!(
            "{verdict} {id} {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
    };
    report("1", "constants chain", &mut criterion_1);
    report("2", "correlation identity", &mut criterion_2);
    report("3", "sensing SNR", &mut criterion_3);
    report("4", "ISI-ZF residual", &mut || criterion_4(&mut zf_runs));
    report("5", "SCA correctness", &mut || criterion_5(&mut zf_runs));
    report("6", "beampattern peaks", &mut criterion_6);
    report("7", "spectral efficiency trends", &mut criterion_7);
    report("8a", "peak-power SNR ratio", &mut criterion_8a);
    report("8b", "Doppler aliasing", &mut criterion_8b);
    report("8c", "PAPR", &mut criterion_8c);
    report("9", "projectors and bounds", &mut criterion_9);
    if failures == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
