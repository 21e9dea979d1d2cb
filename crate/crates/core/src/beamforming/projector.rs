use nalgebra::DMatrix;

use crate::channel::MultipathChannel;
use crate::error::{Error, Result};
use crate::math::{CMatrix, CVector};

/// `Q_l` for every path together with the interference matrices `H_l` it was
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    projectors: Vec<CMatrix>,
    interference: Vec<CMatrix>,
}

impl ProjectorSet {
    pub fn new(ch: &MultipathChannel) -> Result<Self> {
        check_zf_feasible(ch)?;
        let interference: Vec<CMatrix> = (0..ch.num_paths())
            .map(|l| interference_matrix(ch, l))
            .collect();
        let projectors = interference
            .iter()
            .map(|h| complement_projector(h, ch.num_antennas()))
            .collect();
        Ok(ProjectorSet {
            projectors,
            interference,
        })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projector(&self, l: usize) -> &CMatrix {
        &self.projectors[l]
    }

    /// `H_l = [h_1, …, h_{l-1}, h_{l+1}, …, h_L]` (M×(L−1)).
    pub fn interference(&self, l: usize) -> &CMatrix {
        &self.interference[l]
    }

    pub fn project(&self, l: usize, v: &CVector) -> CVector {
        &self.projectors[l] * v
    }
}

fn check_zf_feasible(ch: &MultipathChannel) -> Result<()> {
    if ch.num_antennas() < ch.num_paths() {
        return Err(Error::ZeroForcingInfeasible {
            antennas: ch.num_antennas(),
            paths: ch.num_paths(),
        });
    }
    Ok(())
}

fn interference_matrix(ch: &MultipathChannel, l: usize) -> CMatrix {
    let cols: Vec<CVector> = (0..ch.num_paths())
        .filter(|&j| j != l)
        .map(|j| ch.path_vector(j).clone())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(ch.num_antennas(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// `I − U U^H` with `U` an orthonormal basis of `range(H)`. Going through the
/// SVD makes this the pseudo-inverse form, so nearly parallel paths do not
/// blow up `(H^H H)^{-1}`.
fn complement_projector(h: &CMatrix, m: usize) -> CMatrix {
    let identity = CMatrix::identity(m, m);
    if h.ncols() == 0 {
        return identity;
    }
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return identity;
    }
    let tol = smax * f64::EPSILON * m.max(h.ncols()) as f64;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let basis = DMatrix::from_fn(m, keep.len(), |r, c| u[(r, keep[c])]);
    identity - &basis * basis.adjoint()
}

/// Projector onto the orthogonal complement of `{h_j : j ≠ l}`.
pub fn nullspace_projector(ch: &MultipathChannel, l: usize) -> Result<CMatrix> {
    check_zf_feasible(ch)?;
    if l >= ch.num_paths() {
        return Err(Error::invalid(
            "l",
            format!("path index {l} out of range for L = {}", ch.num_paths()),
        ));
    }
    Ok(complement_projector(
        &interference_matrix(ch, l),
        ch.num_antennas(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_multipath_channel, ChannelGenConfig, ScenarioConfig};
    use crate::math::{stream_rng, ONE, ZERO};

    #[test]
    fn single_path_gives_identity() {
        let ch = MultipathChannel::from_directions(4, &[0.3], &[0]).unwrap();
        let q = nullspace_projector(&ch, 0).unwrap();
        assert!((q - CMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_pair_gives_rank_one_complement() {
        let h1 = CVector::from_vec(vec![ONE, ZERO]);
        let h2 = CVector::from_vec(vec![ZERO, ONE * 2.0]);
        let ch = MultipathChannel::from_vectors(vec![h1.clone(), h2], &[0, 1]).unwrap();
        let q = nullspace_projector(&ch, 0).unwrap();
        let expected = (&h1 * h1.adjoint()).unscale(h1.norm_squared());
        assert!((q - expected).norm() < 1e-14);
    }

    #[test]
    fn projector_algebra_on_random_channels() {
        let mut cfg = ScenarioConfig::reference();
        cfg.num_antennas = 6;
        for seed in 0..10 {
            let ch = generate_multipath_channel(
                &cfg,
                &ChannelGenConfig::mmwave(3),
                &mut stream_rng(seed, 0),
            )
            .unwrap();
            let set = ProjectorSet::new(&ch).unwrap();
            for l in 0..3 {
                let q = set.projector(l);
                assert!((q * q - q).norm() < 1e-10);
                assert!((q - q.adjoint()).norm() < 1e-10);
                assert!((set.interference(l).adjoint() * q).norm() < 1e-10);
                assert!((q.trace().re - 4.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parallel_paths_use_pseudo_inverse() {
        let h = crate::channel::steering(0.2, 4);
        let ch = MultipathChannel::from_vectors(
            vec![h.clone(), h.scale(2.0), crate::channel::steering(-0.7, 4)],
            &[0, 1, 2],
        )
        .unwrap();
        let q = nullspace_projector(&ch, 2).unwrap();
        assert!((q.trace().re - 3.0).abs() < 1e-9);
        assert!((q.adjoint() * &h).norm() < 1e-10);
    }

    #[test]
    fn too_few_antennas_is_reported() {
        let ch = MultipathChannel::from_directions(2, &[0.1, 0.2, 0.3], &[0, 1, 2]).unwrap();
        assert!(matches!(
            nullspace_projector(&ch, 0),
            Err(Error::ZeroForcingInfeasible {
                antennas: 2,
                paths: 3
            })
        ));
    }
}
