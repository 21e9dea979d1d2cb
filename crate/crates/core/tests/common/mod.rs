#![allow(dead_code, clippy::needless_range_loop)]

use damisac::beamforming::{nullspace_projector, IsacProblem};
use damisac::channel::{
    generate_multipath_channel, ChannelGenConfig, MultipathChannel, ScenarioConfig,
};
use damisac::math::{complex_gaussian, stream_rng, CMatrix, CVector};
use damisac::waveform::{generate_symbols, Modulation, SymbolBlock};
use num_complex::Complex64;
use rand::Rng;

/// Reference scenario resized to `M` antennas, guard `N_p` and `N = N_c − N_p`.
pub fn scenario(m: usize, guard: usize, n: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference();
    cfg.num_antennas = m;
    cfg.guard_length = guard;
    cfg.block_length = n + guard;
    cfg
}

pub fn channel(seed: u64, m: usize, l: usize) -> MultipathChannel {
    let cfg = scenario(m, 200, 1000);
    generate_multipath_channel(&cfg, &ChannelGenConfig::mmwave(l), &mut stream_rng(seed, 0))
        .unwrap()
}

pub fn cvec(rng: &mut impl Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
}

pub fn cmat(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| complex_gaussian(rng, 1.0))
}

pub fn qpsk(seed: u64, n: usize) -> SymbolBlock {
    generate_symbols(&mut stream_rng(seed, 1), n, Modulation::QPSK).unwrap()
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Best objective `|h̄^H b̄|²` among random full-power ISI-ZF points that meet
/// the sensing constraint, followed by a shrinking random hill-climb from the
/// best sample. Independent of the SCA machinery: only the problem's
/// objective and constraint evaluations are used.
pub fn random_search_optimum(
    ch: &MultipathChannel,
    problem: &IsacProblem,
    samples: usize,
    seed: u64,
) -> f64 {
    let m = ch.num_antennas();
    let l = ch.num_paths();
    let q: Vec<CMatrix> = (0..l)
        .map(|i| nullspace_projector(ch, i).unwrap())
        .collect();
    let power = problem.power();
    let required = problem.required_gain();
    let mut rng = stream_rng(seed, 99);
    let project = |v: &CVector| -> CVector {
        let mut out = CVector::zeros(m * l);
        for i in 0..l {
            let block = &q[i] * v.rows(i * m, m);
            out.rows_mut(i * m, m).copy_from(&block);
        }
        out.scale(power.sqrt() / out.norm())
    };
    let feasible = |b: &CVector| problem.sensing(b) >= required;
    let mut best: Option<(f64, CVector)> = None;
    for _ in 0..samples {
        let b = project(&cvec(&mut rng, m * l));
        if feasible(&b) {
            let g = problem.objective(&b);
            if best.as_ref().is_none_or(|(bg, _)| g > *bg) {
                best = Some((g, b));
            }
        }
    }
    let Some((mut g, mut b)) = best else {
        return 0.0;
    };
    let mut step = 0.3;
    while step > 1e-5 {
        let mut improved = false;
        for _ in 0..200 {
            let cand = project(&(&b + cvec(&mut rng, m * l).scale(step)));
            if feasible(&cand) {
                let gc = problem.objective(&cand);
                if gc > g {
                    g = gc;
                    b = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    g
}
