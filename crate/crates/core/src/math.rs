//! Shared numeric helpers: complex vector aliases, complex Gaussian sampling,
//! unit conversions and seeded RNG streams.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Propagation speed used for range conversions (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Draws one sample of CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Adds i.i.d. CN(0, variance) noise in place. A zero variance leaves the
/// samples and the RNG untouched.
pub fn add_awgn<R: Rng + ?Sized>(rng: &mut R, samples: &mut [Complex64], variance: f64) {
    if variance <= 0.0 {
        return;
    }
    for x in samples.iter_mut() {
        *x += complex_gaussian(rng, variance);
    }
}

/// `e^{j phase}`
#[inline]
pub fn phasor(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

/// Deterministic RNG for one independent stream (trial, realization, ...)
/// of a seeded run. Streams never overlap for distinct `stream` values.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `Σ |x_i|²` over a slice.
pub fn energy(samples: &[Complex64]) -> f64 {
    samples.iter().map(|x| x.norm_sqr()).sum()
}

/// Serde adapter storing a complex vector as `[[re, im], ...]`.
pub mod cvector_serde {
    use super::CVector;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(
            pairs.len(),
            pairs.into_iter().map(|[re, im]| Complex64::new(re, im)),
        ))
    }
}

/// Serde adapter for complex scalars as `[re, im]`.
pub mod complex_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions_round_trip() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(1.0) - 30.0).abs() < 1e-12);
        for db in [-169.0, -3.0, 0.0, 12.5, 40.0] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-10);
        }
    }

    #[test]
    fn complex_gaussian_variance() {
        let mut rng = stream_rng(7, 0);
        let n = 100_000;
        let var = 2.5;
        let p: f64 = (0..n)
            .map(|_| complex_gaussian(&mut rng, var).norm_sqr())
            .sum::<f64>()
            / n as f64;
        // |z|² ~ Exp(mean var): std error var/sqrt(n)
        assert!((p - var).abs() < 3.0 * var / (n as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(1, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| stream_rng(1, 3).random()).collect();
        assert_eq!(a, b);
        let x: u64 = stream_rng(1, 3).random();
        let y: u64 = stream_rng(1, 4).random();
        assert_ne!(x, y);
    }
}
