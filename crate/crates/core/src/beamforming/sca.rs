use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::closed_form::sensing_only_zf_beamformer;
use super::projector::ProjectorSet;
use super::subproblem::solve_subproblem;
use super::verify::{verify_solution, SolutionAudit};
use crate::channel::{steering, MultipathChannel};
use crate::error::{Error, Result};
use crate::math::{CMatrix, CVector};
use crate::sensing::SensingBudget;
use crate::waveform::DamBeamformer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaOptions {
    /// Stop once the relative objective increase falls below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Relative slack on `γ_th ≤ γ_zf,max` and on the start point's sensing SNR.
    pub feasibility_tolerance: f64,
    pub bisection_steps: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            epsilon: 1e-4,
            max_iterations: 100,
            feasibility_tolerance: 1e-9,
            bisection_steps: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub gamma_th: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `|h̄^H b̄_i|²` at every accepted iterate, starting with `b̄_0`.
    pub objective_trajectory: Vec<f64>,
    /// Largest relative drop of a proposed iterate below the current one.
    /// Rounding only; such steps end the loop instead of being accepted.
    pub max_rejected_drop: f64,
    pub audit: SolutionAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsacSolution {
    pub beamformer: DamBeamformer,
    pub comm_snr: f64,
    pub sensing_snr: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub report: SolverReport,
}

impl IsacSolution {
    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }
}

/// The joint problem over the stacked vector `b̄` (length `ML`):
/// maximize `|h̄^H b̄|²` s.t. `Σ_l |a_l^H b_l|² ≥ γ̃_th`, `‖b̄‖² ≤ P`, with
/// `h̄ = [Q_l h_l]`, `a_l = Q_l a(θ)` and `γ̃_th = γ_th σ² / (|α|² N)`.
#[derive(Debug, Clone)]
pub struct IsacProblem {
    projectors: ProjectorSet,
    h_bar: CVector,
    a_proj: Vec<CVector>,
    delays: Vec<usize>,
    num_antennas: usize,
    power: f64,
    gamma_th: f64,
    required: f64,
    theta: f64,
    budget: SensingBudget,
}

impl IsacProblem {
    pub fn new(
        ch: &MultipathChannel,
        theta: f64,
        budget: &SensingBudget,
        gamma_th: f64,
        power: f64,
    ) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        if !gamma_th.is_finite() {
            return Err(Error::invalid("gamma_th", "must be finite"));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::invalid("power", "must be positive"));
        }
        if !(budget.noise_power > 0.0 && budget.alpha.norm_sqr() > 0.0 && budget.cpi_length > 0) {
            return Err(Error::invalid("budget", "needs α ≠ 0, N ≥ 1 and σ² > 0"));
        }
        let projectors = ProjectorSet::new(ch)?;
        let m = ch.num_antennas();
        let l = ch.num_paths();
        let a = steering(theta, m);
        let mut h_bar = CVector::zeros(m * l);
        let mut a_proj = Vec::with_capacity(l);
        for i in 0..l {
            h_bar
                .rows_mut(i * m, m)
                .copy_from(&projectors.project(i, ch.path_vector(i)));
            a_proj.push(projectors.project(i, &a));
        }
        let delays = crate::waveform::assign_delays(&ch.delays())?;
        Ok(IsacProblem {
            projectors,
            h_bar,
            a_proj,
            delays,
            num_antennas: m,
            power,
            gamma_th,
            required: budget.required_gain(gamma_th),
            theta,
            budget: *budget,
        })
    }

    pub fn num_paths(&self) -> usize {
        self.a_proj.len()
    }

    pub fn dim(&self) -> usize {
        self.h_bar.len()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `γ̃_th`
    pub fn required_gain(&self) -> f64 {
        self.required
    }

    pub fn stacked_channel(&self) -> &CVector {
        &self.h_bar
    }

    fn block<'a>(&self, b: &'a CVector, l: usize) -> nalgebra::DVectorView<'a, Complex64> {
        b.rows(l * self.num_antennas, self.num_antennas)
    }

    /// `b̄^H H̄ b̄ = |h̄^H b̄|²`
    pub fn objective(&self, b: &CVector) -> f64 {
        self.h_bar.dotc(b).norm_sqr()
    }

    /// `b̄^H Ā b̄ = Σ_l |a_l^H b_l|²`
    pub fn sensing(&self, b: &CVector) -> f64 {
        (0..self.num_paths())
            .map(|l| self.a_proj[l].dotc(&self.block(b, l)).norm_sqr())
            .sum()
    }

    /// `H̄ b̄`
    fn objective_linear(&self, b: &CVector) -> CVector {
        &self.h_bar * self.h_bar.dotc(b)
    }

    /// `Ā b̄`
    fn sensing_linear(&self, b: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for l in 0..self.num_paths() {
            let w = self.a_proj[l].dotc(&self.block(b, l));
            out.rows_mut(l * self.num_antennas, self.num_antennas)
                .copy_from(&(&self.a_proj[l] * w));
        }
        out
    }

    /// `2 H̄ b̄`, in the sense that the directional derivative along `v` is
    /// `Re(∇^H v)`.
    pub fn objective_gradient(&self, b: &CVector) -> CVector {
        self.objective_linear(b).scale(2.0)
    }

    pub fn sensing_gradient(&self, b: &CVector) -> CVector {
        self.sensing_linear(b).scale(2.0)
    }

    /// `φ_lb(b̄; b̄_i) = 2 Re(b̄_i^H H̄ b̄) − b̄_i^H H̄ b̄_i`
    pub fn objective_lower_bound(&self, b: &CVector, at: &CVector) -> f64 {
        2.0 * self.objective_linear(at).dotc(b).re - self.objective(at)
    }

    /// `ψ_lb(b̄; b̄_i) = 2 Re(b̄_i^H Ā b̄) − b̄_i^H Ā b̄_i`
    pub fn sensing_lower_bound(&self, b: &CVector, at: &CVector) -> f64 {
        2.0 * self.sensing_linear(at).dotc(b).re - self.sensing(at)
    }

    /// `Q̄ b̄`
    pub fn project(&self, b: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim());
        for l in 0..self.num_paths() {
            let v = self.projectors.projector(l) * self.block(b, l);
            out.rows_mut(l * self.num_antennas, self.num_antennas)
                .copy_from(&v);
        }
        out
    }

    /// Stacks the columns of an M×L beam matrix.
    pub fn stack(&self, beams: &CMatrix) -> Result<CVector> {
        if beams.nrows() != self.num_antennas || beams.ncols() != self.num_paths() {
            return Err(Error::DimensionMismatch(format!(
                "expected a {}x{} beam matrix, got {}x{}",
                self.num_antennas,
                self.num_paths(),
                beams.nrows(),
                beams.ncols()
            )));
        }
        Ok(CVector::from_iterator(self.dim(), beams.iter().copied()))
    }

    /// `f_l = Q_l b_l`.
    pub fn beamformer(&self, b: &CVector) -> Result<DamBeamformer> {
        let q = self.project(b);
        let beams = CMatrix::from_column_slice(self.num_antennas, self.num_paths(), q.as_slice());
        DamBeamformer::new(beams, self.delays.clone())
    }

    /// Sensing gain of the sensing-only ZF beamformer,
    /// `P Σ‖Q_l a‖⁴ / Σ‖Q_l a‖²`. Thresholds above it are declared infeasible.
    pub fn sensing_ceiling(&self) -> f64 {
        let norms: Vec<f64> = self.a_proj.iter().map(|v| v.norm_squared()).collect();
        let total: f64 = norms.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        self.power * norms.iter().map(|n| n * n).sum::<f64>() / total
    }

    fn rescale(&self, b: CVector) -> CVector {
        let n = b.norm();
        if n == 0.0 {
            b
        } else {
            b.scale(self.power.sqrt() / n)
        }
    }

    fn comm_point(&self) -> CVector {
        self.rescale(self.h_bar.clone())
    }

    /// Stacked sensing-only ZF beamformer with each block rotated so that
    /// `(Q_l h_l)^H b_l` is real and nonnegative. Block phases do not change
    /// the sensing gain, and this choice maximizes the communication gain.
    fn sensing_point(&self) -> CVector {
        let mut b = CVector::zeros(self.dim());
        for l in 0..self.num_paths() {
            let block = &self.a_proj[l];
            let proj = self
                .h_bar
                .rows(l * self.num_antennas, self.num_antennas)
                .dotc(block);
            let rot = if proj.norm() > 0.0 {
                proj.conj() / proj.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            b.rows_mut(l * self.num_antennas, self.num_antennas)
                .copy_from(&(block * rot));
        }
        self.rescale(b)
    }

    fn meets_sensing(&self, b: &CVector, tol: f64) -> bool {
        self.sensing(b) >= self.required - tol * self.required.abs()
    }

    /// Feasible start: the blend `(1−ρ) b_comm + ρ b_sens` rescaled to power
    /// `P`, with the smallest feasible `ρ` found by bisection. `None` when even
    /// `ρ = 1` misses the sensing threshold.
    pub fn initial_point(&self, opts: &ScaOptions) -> Option<CVector> {
        let comm = self.comm_point();
        let sens = self.sensing_point();
        let blend = |rho: f64| self.rescale(comm.scale(1.0 - rho) + sens.scale(rho));
        let start = blend(0.0);
        if self.meets_sensing(&start, 0.0) {
            return Some(start);
        }
        let end = blend(1.0);
        if !self.meets_sensing(&end, opts.feasibility_tolerance) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..opts.bisection_steps {
            let mid = 0.5 * (lo + hi);
            if self.meets_sensing(&blend(mid), 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(blend(hi))
    }

    /// Nudges an iterate with `h̄^H b̄ = 0` toward `b_comm` while keeping the
    /// sensing constraint.
    fn restart_from(&self, b: &CVector, opts: &ScaOptions) -> Option<CVector> {
        let comm = self.comm_point();
        [1e-3, 1e-2, 1e-1, 1.0].iter().find_map(|&delta| {
            let cand = self.rescale(b + comm.scale(delta));
            (self.objective(&cand) > 0.0 && self.meets_sensing(&cand, opts.feasibility_tolerance))
                .then_some(cand)
        })
    }

    fn audit(&self, bf: &DamBeamformer, ch: &MultipathChannel) -> Result<SolutionAudit> {
        verify_solution(
            bf.beams(),
            ch,
            self.theta,
            &self.budget,
            self.gamma_th,
            self.power,
        )
    }
}

struct ScaRun {
    b: CVector,
    trajectory: Vec<f64>,
    iterations: usize,
    status: SolveStatus,
    max_rejected_drop: f64,
}

fn run_sca(problem: &IsacProblem, start: CVector, opts: &ScaOptions) -> Result<ScaRun> {
    let mut b = start;
    let mut g = problem.objective(&b);
    let mut run = ScaRun {
        b: b.clone(),
        trajectory: vec![g],
        iterations: 0,
        status: SolveStatus::MaxIterations,
        max_rejected_drop: 0.0,
    };
    let mut restarted = false;
    while run.iterations < opts.max_iterations {
        let c = problem.objective_linear(&b);
        if c.norm() == 0.0 {
            if restarted {
                return Err(Error::Degenerate(
                    "SCA iterate stays orthogonal to the stacked channel".into(),
                ));
            }
            b = problem.restart_from(&b, opts).ok_or_else(|| {
                Error::Degenerate("no feasible restart for a zero objective gradient".into())
            })?;
            g = problem.objective(&b);
            run.trajectory.push(g);
            restarted = true;
            continue;
        }
        let d = problem.sensing_linear(&b);
        let threshold = 0.5 * (problem.required + problem.sensing(&b));
        let next = match solve_subproblem(&c, &d, threshold, problem.power) {
            Ok(v) => problem.project(&v),
            Err(e) => {
                debug!("subproblem failed at iteration {}: {e}", run.iterations);
                run.status = SolveStatus::Converged;
                break;
            }
        };
        run.iterations += 1;
        let g_next = problem.objective(&next);
        if g_next < g {
            run.max_rejected_drop = run.max_rejected_drop.max((g - g_next) / g);
            run.status = SolveStatus::Converged;
            break;
        }
        let rel = (g_next - g) / g.max(f64::MIN_POSITIVE);
        b = next;
        g = g_next;
        run.trajectory.push(g);
        if rel < opts.epsilon {
            run.status = SolveStatus::Converged;
            break;
        }
    }
    run.b = b;
    Ok(run)
}

fn finish(
    problem: &IsacProblem,
    ch: &MultipathChannel,
    run: ScaRun,
    opts: &ScaOptions,
) -> Result<IsacSolution> {
    let beamformer = problem.beamformer(&run.b)?;
    let audit = problem.audit(&beamformer, ch)?;
    Ok(IsacSolution {
        comm_snr: audit.comm_snr,
        sensing_snr: audit.sensing_snr,
        iterations: run.iterations,
        status: run.status,
        report: SolverReport {
            gamma_th: problem.gamma_th,
            epsilon: opts.epsilon,
            max_iterations: opts.max_iterations,
            status: run.status,
            iterations: run.iterations,
            objective_trajectory: run.trajectory,
            max_rejected_drop: run.max_rejected_drop,
            audit,
        },
        beamformer,
    })
}

/// Returned for thresholds above the ZF sensing ceiling; carries the
/// sensing-only beamformer (or ZF-MRT when ZF leaves no energy toward θ).
fn infeasible(
    problem: &IsacProblem,
    ch: &MultipathChannel,
    opts: &ScaOptions,
) -> Result<IsacSolution> {
    let beamformer =
        match sensing_only_zf_beamformer(ch, problem.theta, problem.power, &problem.budget) {
            Ok(s) => s.beamformer,
            Err(Error::SensingInfeasible { .. }) => {
                super::closed_form::isi_zf_mrt_beamformer(ch, problem.power)?
            }
            Err(e) => return Err(e),
        };
    let audit = problem.audit(&beamformer, ch)?;
    Ok(IsacSolution {
        comm_snr: audit.comm_snr,
        sensing_snr: audit.sensing_snr,
        iterations: 0,
        status: SolveStatus::Infeasible,
        report: SolverReport {
            gamma_th: problem.gamma_th,
            epsilon: opts.epsilon,
            max_iterations: opts.max_iterations,
            status: SolveStatus::Infeasible,
            iterations: 0,
            objective_trajectory: Vec::new(),
            max_rejected_drop: 0.0,
            audit,
        },
        beamformer,
    })
}

fn validate_options(opts: &ScaOptions) -> Result<()> {
    if !(opts.epsilon.is_finite() && opts.epsilon >= 0.0) {
        return Err(Error::invalid("epsilon", "must be nonnegative"));
    }
    if !(opts.feasibility_tolerance.is_finite() && opts.feasibility_tolerance >= 0.0) {
        return Err(Error::invalid(
            "feasibility_tolerance",
            "must be nonnegative",
        ));
    }
    Ok(())
}

fn above_ceiling(problem: &IsacProblem, opts: &ScaOptions) -> bool {
    problem.required > 0.0
        && problem.required > problem.sensing_ceiling() * (1.0 + opts.feasibility_tolerance)
}

/// SCA for the joint ISI-ZF beamforming problem, started from the bisected
/// blend of the communication-only and sensing-only beamformers.
pub fn sca_optimize(
    ch: &MultipathChannel,
    theta: f64,
    budget: &SensingBudget,
    gamma_th: f64,
    power: f64,
    opts: &ScaOptions,
) -> Result<IsacSolution> {
    validate_options(opts)?;
    let problem = IsacProblem::new(ch, theta, budget, gamma_th, power)?;
    if problem.h_bar.norm() == 0.0 {
        return Err(Error::Degenerate(
            "every projected channel Q_l h_l is zero".into(),
        ));
    }
    if above_ceiling(&problem, opts) {
        return infeasible(&problem, ch, opts);
    }
    let Some(start) = problem.initial_point(opts) else {
        return infeasible(&problem, ch, opts);
    };
    let run = run_sca(&problem, start, opts)?;
    finish(&problem, ch, run, opts)
}

/// Like [`sca_optimize`], but starts from `warm` (projected and rescaled to
/// full power) when it meets the sensing threshold. Sweeping `γ_th` downward
/// and warm-starting each point from the previous solution makes `γ_c`
/// nonincreasing in `γ_th`.
pub fn sca_optimize_from(
    ch: &MultipathChannel,
    theta: f64,
    budget: &SensingBudget,
    gamma_th: f64,
    power: f64,
    opts: &ScaOptions,
    warm: &DamBeamformer,
) -> Result<IsacSolution> {
    validate_options(opts)?;
    let problem = IsacProblem::new(ch, theta, budget, gamma_th, power)?;
    if problem.h_bar.norm() == 0.0 {
        return Err(Error::Degenerate(
            "every projected channel Q_l h_l is zero".into(),
        ));
    }
    if above_ceiling(&problem, opts) {
        return infeasible(&problem, ch, opts);
    }
    let stacked = problem.rescale(problem.project(&problem.stack(warm.beams())?));
    let start = if problem.objective(&stacked) > 0.0 && problem.meets_sensing(&stacked, 0.0) {
        Some(stacked)
    } else {
        problem.initial_point(opts)
    };
    let Some(start) = start else {
        return infeasible(&problem, ch, opts);
    };
    let run = run_sca(&problem, start, opts)?;
    finish(&problem, ch, run, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::isi_zf_mrt_beamformer;
    use crate::channel::{generate_multipath_channel, ChannelGenConfig, ScenarioConfig};
    use crate::math::{complex_gaussian, stream_rng};
    use crate::waveform::comm_snr;

    fn setup(seed: u64, m: usize, l: usize) -> (MultipathChannel, SensingBudget) {
        let mut cfg = ScenarioConfig::reference();
        cfg.num_antennas = m;
        let ch = generate_multipath_channel(
            &cfg,
            &ChannelGenConfig::mmwave(l),
            &mut stream_rng(seed, 0),
        )
        .unwrap();
        (ch, SensingBudget::new(Complex64::new(1.0, 0.0), 1, 1.0))
    }

    #[test]
    fn zero_threshold_recovers_mrt() {
        for seed in 0..5 {
            let (ch, b) = setup(seed, 16, 4);
            let sol = sca_optimize(&ch, 0.5, &b, 0.0, 1.0, &ScaOptions::default()).unwrap();
            let mrt = comm_snr(&isi_zf_mrt_beamformer(&ch, 1.0).unwrap(), &ch, 1.0).unwrap();
            assert!((sol.comm_snr - mrt).abs() <= 1e-9 * mrt);
            assert_eq!(sol.status, SolveStatus::Converged);
            assert!(sol.iterations <= 1);
        }
    }

    #[test]
    fn trajectory_is_monotone_and_constraints_hold() {
        for seed in 0..10 {
            let (ch, b) = setup(seed, 8, 3);
            let problem = IsacProblem::new(&ch, 0.3, &b, 0.0, 1.0).unwrap();
            let gamma = 0.7 * b.snr(problem.sensing_ceiling());
            let sol = sca_optimize(&ch, 0.3, &b, gamma, 1.0, &ScaOptions::default()).unwrap();
            assert_ne!(sol.status, SolveStatus::Infeasible);
            let t = &sol.report.objective_trajectory;
            assert!(t.windows(2).all(|w| w[1] >= w[0]));
            assert!(sol.report.max_rejected_drop < 1e-12);
            assert!(sol.report.audit.is_feasible(1e-6), "{:?}", sol.report.audit);
        }
    }

    #[test]
    fn threshold_above_ceiling_is_infeasible() {
        let (ch, b) = setup(3, 8, 3);
        let problem = IsacProblem::new(&ch, 0.3, &b, 0.0, 1.0).unwrap();
        let gamma = 1.5 * b.snr(problem.sensing_ceiling());
        let sol = sca_optimize(&ch, 0.3, &b, gamma, 1.0, &ScaOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(!sol.is_feasible());
    }

    #[test]
    fn lower_bounds_touch_and_underestimate() {
        let (ch, b) = setup(4, 6, 3);
        let problem = IsacProblem::new(&ch, -0.2, &b, 0.0, 1.0).unwrap();
        let mut rng = stream_rng(4, 1);
        let mut draw = || {
            problem.project(&CVector::from_fn(problem.dim(), |_, _| {
                complex_gaussian(&mut rng, 1.0)
            }))
        };
        let at = draw();
        assert!((problem.objective_lower_bound(&at, &at) - problem.objective(&at)).abs() < 1e-9);
        assert!((problem.sensing_lower_bound(&at, &at) - problem.sensing(&at)).abs() < 1e-9);
        for _ in 0..100 {
            let x = draw();
            assert!(problem.objective_lower_bound(&x, &at) <= problem.objective(&x) + 1e-9);
            assert!(problem.sensing_lower_bound(&x, &at) <= problem.sensing(&x) + 1e-9);
        }
    }

    #[test]
    fn warm_start_never_does_worse_than_its_start() {
        let (ch, b) = setup(5, 8, 3);
        let opts = ScaOptions::default();
        let problem = IsacProblem::new(&ch, 0.3, &b, 0.0, 1.0).unwrap();
        let ceiling = b.snr(problem.sensing_ceiling());
        let high = sca_optimize(&ch, 0.3, &b, 0.8 * ceiling, 1.0, &opts).unwrap();
        let low =
            sca_optimize_from(&ch, 0.3, &b, 0.4 * ceiling, 1.0, &opts, &high.beamformer).unwrap();
        assert!(low.comm_snr >= high.comm_snr * (1.0 - 1e-12));
    }

    #[test]
    fn too_many_paths_is_an_error() {
        let (ch, b) = setup(6, 4, 5);
        assert!(matches!(
            sca_optimize(&ch, 0.0, &b, 0.0, 1.0, &ScaOptions::default()),
            Err(Error::ZeroForcingInfeasible { .. })
        ));
    }
}
