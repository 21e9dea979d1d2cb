use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use damisac::error::Result;
use damisac::experiment::{
    load_config, run_beampattern, run_dd_map, run_ofdm_compare, run_se_sweep, DbGrid, Experiment,
    ExperimentConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "damisac",
    version,
    about = "Delay alignment modulation ISAC experiments"
)]
struct Cli {
    #[command(subcommand)]
    experiment: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmit beampatterns of the comm-only, sensing-only and ISAC beamformers
    Beampattern(Common),
    /// Mean spectral efficiency versus sensing SNR threshold
    SeSweep(Common),
    /// Delay-Doppler map and estimate for one target
    DdMap(Common),
    /// DAM against OFDM radar: limits, SNR, PAPR and Doppler aliasing
    OfdmCompare(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON config; missing fields take the defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte-Carlo channel realizations
    #[arg(long)]
    trials: Option<usize>,
    /// Threshold grid in dB as start:stop:step
    #[arg(long, value_name = "A:B:STEP")]
    gamma_th_grid: Option<String>,
}

impl Command {
    fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::Beampattern(c) => (Experiment::Beampattern, c),
            Command::SeSweep(c) => (Experiment::SeSweep, c),
            Command::DdMap(c) => (Experiment::DdMap, c),
            Command::OfdmCompare(c) => (Experiment::OfdmCompare, c),
        }
    }
}

fn configure(experiment: Experiment, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(selected) = cfg.experiment {
        if selected != experiment {
            log::warn!(
                "config selects {}, running {}",
                selected.name(),
                experiment.name()
            );
        }
    }
    cfg.experiment = Some(experiment);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(grid) = &args.gamma_th_grid {
        cfg.se_sweep.gamma_th_db = DbGrid::parse(grid)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.output_dir.as_path();
    match experiment {
        Experiment::Beampattern => {
            let r = run_beampattern(cfg)?;
            log::info!(
                "peaks (deg): comm {:?}, sensing {:?}, isac {:?}",
                r.comm_peaks_deg,
                r.sensing_peaks_deg,
                r.isac_peaks_deg
            );
            r.write(dir, cfg)
        }
        Experiment::SeSweep => Ok(vec![run_se_sweep(cfg)?.write(dir, cfg)?]),
        Experiment::DdMap => {
            let r = run_dd_map(cfg)?;
            log::info!(
                "delay error {} bins, Doppler error {:.3} bins",
                r.delay_error(),
                r.doppler_error_bins()
            );
            r.write(dir, cfg)
        }
        Experiment::OfdmCompare => run_ofdm_compare(cfg)?.write(dir, cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (experiment, args) = cli.experiment.split();
    let outcome = configure(experiment, args).and_then(|cfg| run(experiment, &cfg));
    match outcome {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
