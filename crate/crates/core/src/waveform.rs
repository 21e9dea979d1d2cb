//! DAM transmit signal.
//!
//! Each path `l` gets its own beam `f_l` and a pre-introduced symbol delay
//! `κ_l = n_max - n_l`, so that `x[n] = Σ_l f_l s[n - κ_l]` and every path of
//! the channel delivers `s[n - n_max]` at the receiver at the same time.
//! Symbols before the block start are zero.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::channel::MultipathChannel;
use crate::error::{Error, Result};
use crate::math::{self, complex_gaussian, CMatrix, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// Unit-modulus M-PSK, order a power of two.
    Psk(u32),
    /// CN(0, 1) symbols.
    Gaussian,
}

impl Modulation {
    pub const QPSK: Modulation = Modulation::Psk(4);
}

/// i.i.d. unit-power symbol stream `s[0..N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    symbols: Vec<Complex64>,
    modulation: Modulation,
}

impl SymbolBlock {
    pub fn new(symbols: Vec<Complex64>, modulation: Modulation) -> Self {
        SymbolBlock {
            symbols,
            modulation,
        }
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    /// `s[k]`, zero outside the block.
    #[inline]
    pub fn at(&self, k: isize) -> Complex64 {
        if k < 0 {
            ZERO
        } else {
            self.symbols.get(k as usize).copied().unwrap_or(ZERO)
        }
    }
}

pub fn generate_symbols<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    modulation: Modulation,
) -> Result<SymbolBlock> {
    let symbols = match modulation {
        Modulation::Psk(order) => {
            if order < 2 || !order.is_power_of_two() {
                return Err(Error::invalid(
                    "modulation",
                    format!("PSK order {order} is not a power of two >= 2"),
                ));
            }
            let step = 2.0 * PI / order as f64;
            (0..n)
                .map(|_| math::phasor(step * rng.random_range(0..order) as f64))
                .collect()
        }
        Modulation::Gaussian => (0..n).map(|_| complex_gaussian(rng, 1.0)).collect(),
    };
    Ok(SymbolBlock {
        symbols,
        modulation,
    })
}

/// `κ_l = n_max - n_l`; the latest path gets `κ = 0`.
pub fn assign_delays(path_delays: &[usize]) -> Result<Vec<usize>> {
    let n_max = *path_delays
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("path_delays", "need at least one path"))?;
    let mut sorted = path_delays.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(
            "path_delays",
            "duplicate delays give coinciding pre-delays",
        ));
    }
    Ok(path_delays.iter().map(|&d| n_max - d).collect())
}

/// Per-path beams `F = [f_1 .. f_L]` with their delay schedule `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DamBeamformer {
    beams: CMatrix,
    delays: Vec<usize>,
}

impl DamBeamformer {
    pub fn new(beams: CMatrix, delays: Vec<usize>) -> Result<Self> {
        if beams.ncols() != delays.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} beams but {} pre-delays",
                beams.ncols(),
                delays.len()
            )));
        }
        if delays.is_empty() {
            return Err(Error::invalid("delays", "need at least one path"));
        }
        let mut sorted = delays.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "delays",
                "pre-delays must be pairwise distinct",
            ));
        }
        Ok(DamBeamformer { beams, delays })
    }

    /// Beams bound to a channel, with `κ` from [`assign_delays`].
    pub fn for_channel(beams: CMatrix, ch: &MultipathChannel) -> Result<Self> {
        if beams.nrows() != ch.num_antennas() {
            return Err(Error::DimensionMismatch(format!(
                "beams have {} rows, channel has M = {}",
                beams.nrows(),
                ch.num_antennas()
            )));
        }
        Self::new(beams, assign_delays(&ch.delays())?)
    }

    pub fn beams(&self) -> &CMatrix {
        &self.beams
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    /// max_l κ_l, which equals n_max for a schedule bound to a channel
    /// whose first arrival is at delay 0.
    pub fn max_pre_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    pub fn num_paths(&self) -> usize {
        self.beams.ncols()
    }

    pub fn num_antennas(&self) -> usize {
        self.beams.nrows()
    }
}

/// S̄ shifted by `shift`: the L×N matrix with `[l, n] = s[n - κ_l - shift]`.
pub fn delayed_symbols(sym: &SymbolBlock, delays: &[usize], shift: usize) -> CMatrix {
    let n = sym.len();
    CMatrix::from_fn(delays.len(), n, |l, k| {
        sym.at(k as isize - delays[l] as isize - shift as isize)
    })
}

/// M×N DAM block with column `n` equal to `Σ_l f_l s[n - κ_l]`.
pub fn build_dam_block(sym: &SymbolBlock, bf: &DamBeamformer) -> Result<CMatrix> {
    if sym.is_empty() {
        return Err(Error::invalid("symbols", "block needs N >= 1"));
    }
    let (m, n) = (bf.num_antennas(), sym.len());
    let mut block = CMatrix::from_element(m, n, ZERO);
    for (l, &kappa) in bf.delays().iter().enumerate() {
        let f = bf.beams().column(l);
        for k in kappa..n {
            let s = sym.symbols()[k - kappa];
            let mut col = block.column_mut(k);
            col.axpy(s, &f, math::ONE);
        }
    }
    Ok(block)
}

/// `Σ_l ‖f_l‖²`
pub fn transmit_power(bf: &DamBeamformer) -> f64 {
    bf.beams().norm_squared()
}

/// `Σ_l h_l^H f_l`, the coherent gain of the aligned paths.
pub fn aligned_gain(bf: &DamBeamformer, ch: &MultipathChannel) -> Result<Complex64> {
    check_bound(bf, ch)?;
    Ok(ch
        .paths()
        .iter()
        .enumerate()
        .map(|(l, p)| p.vector.dotc(&bf.beams().column(l)))
        .sum())
}

/// `γ_c = |Σ_l h_l^H f_l|² / σ²`; exact only when the ISI residual vanishes.
pub fn comm_snr(bf: &DamBeamformer, ch: &MultipathChannel, noise_power: f64) -> Result<f64> {
    Ok(aligned_gain(bf, ch)?.norm_sqr() / noise_power)
}

fn check_bound(bf: &DamBeamformer, ch: &MultipathChannel) -> Result<()> {
    if bf.num_paths() != ch.num_paths() || bf.num_antennas() != ch.num_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "beamformer is {}x{}, channel has M = {}, L = {}",
            bf.num_antennas(),
            bf.num_paths(),
            ch.num_antennas(),
            ch.num_paths()
        )));
    }
    Ok(())
}

/// Noiseless received signal split into the path-aligned part and the
/// cross-path ISI residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedDecomposition {
    /// `Σ_l h_l^H f_l s[n - κ_l - n_l]`; equals `(Σ h_l^H f_l) s[n - n_max]`
    /// under the aligned schedule.
    pub desired: Vec<Complex64>,
    /// `Σ_l Σ_{l'≠l} h_l^H f_{l'} s[n - κ_{l'} - n_l]`
    pub isi: Vec<Complex64>,
}

impl ReceivedDecomposition {
    /// Mean ISI power over the samples.
    pub fn isi_power(&self) -> f64 {
        math::energy(&self.isi) / self.isi.len().max(1) as f64
    }
}

pub fn decompose_received(
    bf: &DamBeamformer,
    ch: &MultipathChannel,
    sym: &SymbolBlock,
) -> Result<ReceivedDecomposition> {
    check_bound(bf, ch)?;
    let n = sym.len();
    let mut desired = vec![ZERO; n];
    let mut isi = vec![ZERO; n];
    for (l, path) in ch.paths().iter().enumerate() {
        for (lp, &kappa) in bf.delays().iter().enumerate() {
            let coupling = path.vector.dotc(&bf.beams().column(lp));
            let lag = (kappa + path.delay) as isize;
            let target = if l == lp { &mut desired } else { &mut isi };
            for (k, y) in target.iter_mut().enumerate() {
                *y += coupling * sym.at(k as isize - lag);
            }
        }
    }
    Ok(ReceivedDecomposition { desired, isi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaprMode {
    /// Instantaneous power `‖x[n]‖²` summed over the array.
    #[default]
    ArrayAggregate,
    /// Largest per-antenna PAPR.
    PerAntenna,
}

/// `max_n ‖x[n]‖² / mean_n ‖x[n]‖²` over the block columns.
pub fn papr_empirical(block: &CMatrix) -> Result<f64> {
    papr_with_mode(block, PaprMode::ArrayAggregate)
}

pub fn papr_with_mode(block: &CMatrix, mode: PaprMode) -> Result<f64> {
    if block.ncols() == 0 || block.nrows() == 0 {
        return Err(Error::invalid("block", "empty block"));
    }
    let ratio = |powers: &mut dyn Iterator<Item = f64>| -> Option<f64> {
        let (mut peak, mut sum, mut count) = (0f64, 0f64, 0usize);
        for p in powers {
            peak = peak.max(p);
            sum += p;
            count += 1;
        }
        (sum > 0.0).then(|| peak * count as f64 / sum)
    };
    let value = match mode {
        PaprMode::ArrayAggregate => ratio(&mut block.column_iter().map(|c| c.norm_squared())),
        PaprMode::PerAntenna => block
            .row_iter()
            .filter_map(|r| ratio(&mut r.iter().map(|x| x.norm_sqr())))
            .reduce(f64::max),
    };
    value.ok_or_else(|| Error::Degenerate("PAPR of an all-zero block".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{steering, MultipathChannel};
    use crate::math::{stream_rng, CVector};

    #[test]
    fn delay_schedule_examples() {
        assert_eq!(assign_delays(&[3, 7, 10]).unwrap(), vec![7, 3, 0]);
        assert_eq!(assign_delays(&[0]).unwrap(), vec![0]);
        assert_eq!(assign_delays(&[0, 5]).unwrap(), vec![5, 0]);
        assert!(assign_delays(&[2, 4, 2]).is_err());
        assert!(assign_delays(&[]).is_err());
    }

    #[test]
    fn psk_symbols_unit_modulus_and_reproducible() {
        let a = generate_symbols(&mut stream_rng(3, 0), 1000, Modulation::QPSK).unwrap();
        assert!(a.symbols().iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
        let b = generate_symbols(&mut stream_rng(3, 0), 1000, Modulation::QPSK).unwrap();
        assert_eq!(a, b);
        assert!(generate_symbols(&mut stream_rng(0, 0), 4, Modulation::Psk(3)).is_err());
        assert!(generate_symbols(&mut stream_rng(0, 0), 4, Modulation::Psk(1)).is_err());
    }

    #[test]
    fn gaussian_symbols_unit_power() {
        let n = 100_000;
        let s = generate_symbols(&mut stream_rng(4, 0), n, Modulation::Gaussian).unwrap();
        let p = math::energy(s.symbols()) / n as f64;
        // |s|² ~ Exp(1): std error 1/sqrt(n)
        assert!((p - 1.0).abs() < 3.0 / (n as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn single_path_passthrough() {
        let sym = generate_symbols(&mut stream_rng(5, 0), 16, Modulation::QPSK).unwrap();
        let mut f = CMatrix::from_element(3, 1, ZERO);
        f[(0, 0)] = math::ONE;
        let bf = DamBeamformer::new(f, vec![0]).unwrap();
        let x = build_dam_block(&sym, &bf).unwrap();
        for n in 0..16 {
            assert_eq!(x[(0, n)], sym.symbols()[n]);
            assert_eq!(x[(1, n)], ZERO);
            assert_eq!(x[(2, n)], ZERO);
        }
    }

    #[test]
    fn column_construction_equals_matrix_product() {
        let mut rng = stream_rng(6, 0);
        let sym = generate_symbols(&mut rng, 40, Modulation::QPSK).unwrap();
        let f = CMatrix::from_fn(4, 3, |_, _| complex_gaussian(&mut rng, 1.0));
        let bf = DamBeamformer::new(f.clone(), vec![4, 0, 9]).unwrap();
        let x = build_dam_block(&sym, &bf).unwrap();
        let product = &f * delayed_symbols(&sym, bf.delays(), 0);
        assert!((x - product).norm() < 1e-12);
    }

    #[test]
    fn beamformer_rejects_repeated_pre_delays() {
        let f = CMatrix::from_element(2, 2, math::ONE);
        assert!(DamBeamformer::new(f.clone(), vec![1, 1]).is_err());
        assert!(DamBeamformer::new(f, vec![1]).is_err());
    }

    #[test]
    fn equal_split_sensing_beam_uses_full_power() {
        let (m, l, p) = (8, 3, 2.0);
        let a = steering(0.3, m);
        let scale = Complex64::new((p / (m * l) as f64).sqrt(), 0.0);
        let f = CMatrix::from_columns(&vec![&a * scale; l]);
        let bf = DamBeamformer::new(f, vec![0, 1, 2]).unwrap();
        assert!((transmit_power(&bf) - p).abs() < 1e-12);
        let zero = DamBeamformer::new(CMatrix::from_element(m, l, ZERO), vec![0, 1, 2]).unwrap();
        assert_eq!(transmit_power(&zero), 0.0);
    }

    #[test]
    fn single_path_matched_beam_snr() {
        let mut rng = stream_rng(7, 0);
        let h = CVector::from_fn(6, |_, _| complex_gaussian(&mut rng, 1.0));
        let ch = MultipathChannel::from_vectors(vec![h.clone()], &[4]).unwrap();
        let p: f64 = 1.5;
        let f = &h * Complex64::new(p.sqrt() / h.norm(), 0.0);
        let bf = DamBeamformer::for_channel(CMatrix::from_columns(&[f]), &ch).unwrap();
        let sigma2 = 0.1;
        let snr = comm_snr(&bf, &ch, sigma2).unwrap();
        assert!((snr - p * h.norm_squared() / sigma2).abs() < 1e-9 * snr);
    }

    #[test]
    fn single_path_has_no_isi() {
        let mut rng = stream_rng(8, 0);
        let h = CVector::from_fn(4, |_, _| complex_gaussian(&mut rng, 1.0));
        let ch = MultipathChannel::from_vectors(vec![h], &[2]).unwrap();
        let f = CMatrix::from_fn(4, 1, |_, _| complex_gaussian(&mut rng, 1.0));
        let bf = DamBeamformer::for_channel(f, &ch).unwrap();
        let sym = generate_symbols(&mut rng, 64, Modulation::QPSK).unwrap();
        let d = decompose_received(&bf, &ch, &sym).unwrap();
        assert!(d.isi.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn flat_psk_block_has_unit_papr() {
        let sym = generate_symbols(&mut stream_rng(9, 0), 256, Modulation::QPSK).unwrap();
        let f = CMatrix::from_columns(&[steering(0.2, 8)]);
        let bf = DamBeamformer::new(f, vec![0]).unwrap();
        let x = build_dam_block(&sym, &bf).unwrap();
        let papr = papr_empirical(&x).unwrap();
        assert!((papr - 1.0).abs() < 1e-12);
        assert!((papr_with_mode(&x, PaprMode::PerAntenna).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn papr_rejects_zero_block() {
        assert!(papr_empirical(&CMatrix::from_element(2, 3, ZERO)).is_err());
        assert!(papr_empirical(&CMatrix::from_element(2, 0, ZERO)).is_err());
    }
}
