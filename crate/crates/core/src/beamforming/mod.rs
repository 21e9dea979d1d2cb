//! ISI-ZF beamforming for DAM-ISAC.
//!
//! Every ISI-ZF beamformer has the form `f_l = Q_l b_l` with `Q_l` the
//! projector onto the orthogonal complement of the other paths' channels, so
//! the joint design works on the stacked vector `b̄ = [b_1; …; b_L]` restricted
//! to the range of `Q̄ = blkdiag(Q_1, …, Q_L)`. On that subspace the power
//! constraint is a ball and both the objective `|h̄^H b̄|²` and the sensing gain
//! `Σ_l |a^H Q_l b_l|²` are convex quadratics, which SCA handles with linear
//! lower bounds.

mod closed_form;
mod projector;
mod sca;
mod subproblem;
mod verify;

pub use closed_form::{isi_zf_mrt_beamformer, sensing_only_zf_beamformer, SensingZf};
pub use projector::{nullspace_projector, ProjectorSet};
pub use sca::{
    sca_optimize, sca_optimize_from, IsacProblem, IsacSolution, ScaOptions, SolveStatus,
    SolverReport,
};
pub use subproblem::{solve_subproblem, Subproblem};
pub use verify::{verify_solution, SolutionAudit};
