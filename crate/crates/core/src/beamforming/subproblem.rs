use crate::error::{Error, Result};
use crate::math::CVector;

/// Linearized SCA step: maximize `Re(c^H b)` subject to `Re(d^H b) ≥ t` and
/// `‖b‖² ≤ P`.
#[derive(Debug, Clone, Copy)]
pub struct Subproblem<'a> {
    pub c: &'a CVector,
    pub d: &'a CVector,
    pub threshold: f64,
    pub power: f64,
}

impl Subproblem<'_> {
    pub fn solve(&self) -> Result<CVector> {
        solve_subproblem(self.c, self.d, self.threshold, self.power)
    }

    pub fn objective(&self, b: &CVector) -> f64 {
        self.c.dotc(b).re
    }

    pub fn constraint(&self, b: &CVector) -> f64 {
        self.d.dotc(b).re
    }
}

/// Closed-form solution of [`Subproblem`].
///
/// Viewed as a real vector space, the feasible set is a ball cut by one
/// halfspace. If `√P ĉ` satisfies the halfspace it is optimal; otherwise the
/// halfspace is active and the optimum is `τ d̂ + √(P − τ²) ĉ_⊥` with
/// `τ = t/‖d‖` and `ĉ_⊥` the unit component of `c` orthogonal to `d`.
pub fn solve_subproblem(c: &CVector, d: &CVector, threshold: f64, power: f64) -> Result<CVector> {
    if c.len() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "c has {} entries, d has {}",
            c.len(),
            d.len()
        )));
    }
    if !(power.is_finite() && power > 0.0) || !threshold.is_finite() {
        return Err(Error::invalid(
            "subproblem",
            "power must be positive and the threshold finite",
        ));
    }
    let radius = power.sqrt();
    let cn = c.norm();
    let dn = d.norm();
    let infeasible = || Error::SensingInfeasible {
        required: threshold,
        achievable: radius * dn,
    };
    let zeros = || CVector::zeros(c.len());

    if dn == 0.0 {
        if threshold > 0.0 {
            return Err(infeasible());
        }
        return Ok(if cn > 0.0 {
            c.scale(radius / cn)
        } else {
            zeros()
        });
    }
    let tau = threshold / dn;
    if tau > radius * (1.0 + 1e-12) {
        return Err(infeasible());
    }
    let tau = tau.min(radius);

    if cn > 0.0 {
        let candidate = c.unscale(cn / radius);
        if d.dotc(&candidate).re >= threshold {
            return Ok(candidate);
        }
    }
    let d_hat = d.unscale(dn);
    let along = d_hat.dotc(c).re;
    let perp = c - d_hat.scale(along);
    let pn = perp.norm();
    let mut b = d_hat.scale(tau);
    if pn > 1e-14 * cn {
        let rest = (power - tau * tau).max(0.0).sqrt();
        b += perp.scale(rest / pn);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{complex_gaussian, stream_rng};
    use num_complex::Complex64;

    fn random(seed: u64, n: usize) -> CVector {
        let mut rng = stream_rng(seed, 7);
        CVector::from_fn(n, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn slack_constraint_gives_scaled_objective_direction() {
        let c = random(1, 8);
        let d = random(2, 8);
        let b = solve_subproblem(&c, &d, -1e9, 2.0).unwrap();
        let expected = &c * Complex64::new(2f64.sqrt() / c.norm(), 0.0);
        assert!((b - expected).norm() < 1e-12);
    }

    #[test]
    fn aligned_vectors() {
        let c = random(3, 6);
        let d = c.scale(0.5);
        let b = solve_subproblem(&c, &d, 0.1, 1.0).unwrap();
        assert!((b - c.unscale(c.norm())).norm() < 1e-12);
    }

    #[test]
    fn active_constraint_is_tight_and_uses_full_power() {
        let c = random(4, 8);
        let d = random(5, 8);
        // Threshold above what √P ĉ achieves but below √P ‖d‖.
        let t = 0.9 * d.norm();
        let b = solve_subproblem(&c, &d, t, 1.0).unwrap();
        assert!((d.dotc(&b).re - t).abs() < 1e-10);
        assert!((b.norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn threshold_beyond_reach_is_infeasible() {
        let c = random(6, 4);
        let d = random(7, 4);
        assert!(solve_subproblem(&c, &d, 1.01 * d.norm(), 1.0).is_err());
        assert!(solve_subproblem(&c, &CVector::zeros(4), 0.1, 1.0).is_err());
        assert!(solve_subproblem(&c, &CVector::zeros(4), 0.0, 1.0).is_ok());
    }

    #[test]
    fn antiparallel_objective_sits_on_the_plane() {
        let d = random(8, 4);
        let c = d.scale(-1.0);
        let b = solve_subproblem(&c, &d, 0.2, 1.0).unwrap();
        assert!((d.dotc(&b).re - 0.2).abs() < 1e-12);
    }
}
