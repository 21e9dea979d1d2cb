//! Average spectral efficiency `(N/N_c) log₂(1 + γ_c⋆)` versus the sensing
//! threshold, over random channel realizations.

use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{Experiment, ExperimentConfig};
use super::{budget, db, open_output, streams, AUDIT_TOL};
use crate::beamforming::{isi_zf_mrt_beamformer, sca_optimize, sca_optimize_from, IsacSolution};
use crate::channel::generate_multipath_channel;
use crate::error::Result;
use crate::math::{db_to_linear, stream_rng};
use crate::waveform::comm_snr;

#[derive(Debug, Clone, PartialEq)]
pub struct SeRow {
    pub num_paths: usize,
    pub gamma_th_db: f64,
    /// Mean over feasible realizations.
    pub mean_se: f64,
    pub feasible: usize,
    pub infeasible: usize,
    pub mean_comm_snr_db: f64,
    /// Mean SE of the ISI-ZF MRT beamformer (the γ_th = 0 optimum).
    pub zf_mrt_se: f64,
    pub mean_iterations: f64,
    /// Feasible solutions whose recomputed constraints miss the tolerance.
    pub audit_failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeSweepResult {
    pub rows: Vec<SeRow>,
    pub gamma_th_db: Vec<f64>,
    pub num_paths: Vec<usize>,
    pub trials: usize,
}

impl SeSweepResult {
    pub fn series(&self, num_paths: usize) -> Vec<&SeRow> {
        self.rows
            .iter()
            .filter(|r| r.num_paths == num_paths)
            .collect()
    }

    /// Thresholds at which every realization of every `L` is feasible.
    pub fn common_feasible_grid(&self) -> Vec<f64> {
        self.gamma_th_db
            .iter()
            .copied()
            .filter(|&g| {
                self.rows
                    .iter()
                    .filter(|r| r.gamma_th_db == g)
                    .all(|r| r.infeasible == 0 && r.feasible > 0)
            })
            .collect()
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
        let scenario = cfg.scenario()?;
        let (path, mut file) =
            open_output(dir, "se_sweep.csv", cfg, Experiment::SeSweep, &scenario)?;
        writeln!(file, "# realizations per L = {}", self.trials)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "num_paths",
            "gamma_th_db",
            "mean_se_bps_hz",
            "feasible",
            "infeasible",
            "mean_comm_snr_db",
            "zf_mrt_se_bps_hz",
            "mean_iterations",
            "audit_failures",
        ])?;
        for r in &self.rows {
            w.write_record(&[
                r.num_paths.to_string(),
                format!("{:.4}", r.gamma_th_db),
                format!("{:.6}", r.mean_se),
                r.feasible.to_string(),
                r.infeasible.to_string(),
                format!("{:.6}", r.mean_comm_snr_db),
                format!("{:.6}", r.zf_mrt_se),
                format!("{:.3}", r.mean_iterations),
                r.audit_failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(path)
    }
}

struct Point {
    comm_snr: f64,
    iterations: usize,
    audit_ok: bool,
}

struct Realization {
    mrt_snr: f64,
    points: Vec<Option<Point>>,
}

fn better(a: IsacSolution, b: Option<IsacSolution>) -> IsacSolution {
    match b {
        Some(b) if b.is_feasible() && (!a.is_feasible() || b.comm_snr > a.comm_snr) => b,
        _ => a,
    }
}

/// One channel, all thresholds. The grid is walked downward and each point
/// keeps the better of a cold start and a warm start from the point above,
/// so `γ_c` is nonincreasing in `γ_th` for every realization.
fn sweep_channel(
    cfg: &ExperimentConfig,
    num_paths: usize,
    trial: usize,
    grid: &[f64],
) -> Result<Realization> {
    let scenario = cfg.scenario()?;
    let stream = streams::SE_SWEEP + ((num_paths as u64) << 24) + trial as u64;
    let ch = generate_multipath_channel(
        &scenario,
        &cfg.channel_gen(num_paths),
        &mut stream_rng(cfg.seed, stream),
    )?;
    let b = budget(cfg, &scenario)?;
    let theta = cfg.target_direction();
    let p = scenario.transmit_power;
    let mrt_snr = comm_snr(&isi_zf_mrt_beamformer(&ch, p)?, &ch, scenario.noise_power)?;

    let mut points: Vec<Option<Point>> = Vec::with_capacity(grid.len());
    let mut previous: Option<IsacSolution> = None;
    for &g_db in grid.iter().rev() {
        let gamma = db_to_linear(g_db);
        let cold = sca_optimize(&ch, theta, &b, gamma, p, &cfg.sca)?;
        let warm = match &previous {
            Some(prev) => Some(sca_optimize_from(
                &ch,
                theta,
                &b,
                gamma,
                p,
                &cfg.sca,
                &prev.beamformer,
            )?),
            None => None,
        };
        let best = better(cold, warm);
        if best.is_feasible() {
            points.push(Some(Point {
                comm_snr: best.comm_snr,
                iterations: best.iterations,
                audit_ok: best.report.audit.is_feasible(AUDIT_TOL),
            }));
            previous = Some(best);
        } else {
            points.push(None);
        }
    }
    points.reverse();
    Ok(Realization { mrt_snr, points })
}

pub fn run_se_sweep(cfg: &ExperimentConfig) -> Result<SeSweepResult> {
    let scenario = cfg.scenario()?;
    let grid = cfg.se_sweep.gamma_th_db.points();
    let prelog = scenario.cpi_length() as f64 / scenario.block_length as f64;
    let se = |snr: f64| prelog * (1.0 + snr).log2();
    let mut rows = Vec::new();
    for &l in &cfg.se_sweep.num_paths {
        let runs: Vec<Realization> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| sweep_channel(cfg, l, t, &grid))
            .collect::<Result<_>>()?;
        let zf_mrt_se = runs.iter().map(|r| se(r.mrt_snr)).sum::<f64>() / runs.len() as f64;
        for (j, &g_db) in grid.iter().enumerate() {
            let feasible: Vec<&Point> = runs.iter().filter_map(|r| r.points[j].as_ref()).collect();
            let k = feasible.len();
            let mean = |f: &dyn Fn(&Point) -> f64| {
                if k == 0 {
                    f64::NAN
                } else {
                    feasible.iter().map(|p| f(p)).sum::<f64>() / k as f64
                }
            };
            rows.push(SeRow {
                num_paths: l,
                gamma_th_db: g_db,
                mean_se: mean(&|p| se(p.comm_snr)),
                feasible: k,
                infeasible: runs.len() - k,
                mean_comm_snr_db: db(mean(&|p| p.comm_snr)),
                zf_mrt_se,
                mean_iterations: mean(&|p| p.iterations as f64),
                audit_failures: feasible.iter().filter(|p| !p.audit_ok).count(),
            });
        }
    }
    Ok(SeSweepResult {
        rows,
        gamma_th_db: grid,
        num_paths: cfg.se_sweep.num_paths.clone(),
        trials: cfg.trials,
    })
}
