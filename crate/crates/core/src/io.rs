//! Binary export of transmit blocks and JSON replay of channel realizations.
//!
//! Block files start with one JSON header line `{"M":..,"N":..,"T_s":..,"seed":..}`
//! followed by `M·N` little-endian `f64` pairs `[re, im]`, row-major.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::channel::MultipathChannel;
use crate::error::{Error, Result};
use crate::math::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockHeader {
    #[serde(rename = "M")]
    pub rows: usize,
    #[serde(rename = "N")]
    pub cols: usize,
    #[serde(rename = "T_s")]
    pub symbol_duration: f64,
    pub seed: u64,
}

pub fn write_block<W: Write>(
    mut out: W,
    block: &CMatrix,
    symbol_duration: f64,
    seed: u64,
) -> Result<()> {
    let header = BlockHeader {
        rows: block.nrows(),
        cols: block.ncols(),
        symbol_duration,
        seed,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for r in 0..block.nrows() {
        for c in 0..block.ncols() {
            let v = block[(r, c)];
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_block<R: Read>(input: R) -> Result<(BlockHeader, CMatrix)> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: BlockHeader = serde_json::from_str(line.trim_end())?;
    let count = header
        .rows
        .checked_mul(header.cols)
        .ok_or_else(|| Error::Config("block header dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 16];
    for _ in 0..count {
        reader.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        data.push(Complex64::new(re, im));
    }
    let block = CMatrix::from_row_slice(header.rows, header.cols, &data);
    Ok((header, block))
}

pub fn save_block(path: &Path, block: &CMatrix, symbol_duration: f64, seed: u64) -> Result<()> {
    write_block(
        BufWriter::new(File::create(path)?),
        block,
        symbol_duration,
        seed,
    )
}

pub fn load_block(path: &Path) -> Result<(BlockHeader, CMatrix)> {
    read_block(File::open(path)?)
}

pub fn save_channel(path: &Path, ch: &MultipathChannel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, ch)?;
    w.flush()?;
    Ok(())
}

pub fn load_channel(path: &Path) -> Result<MultipathChannel> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_multipath_channel, ChannelGenConfig, ScenarioConfig};
    use crate::math::{complex_gaussian, stream_rng};

    #[test]
    fn block_round_trip() {
        let mut rng = stream_rng(1, 0);
        let block = CMatrix::from_fn(3, 5, |_, _| complex_gaussian(&mut rng, 1.0));
        let mut bytes = Vec::new();
        write_block(&mut bytes, &block, 1e-8, 42).unwrap();
        let (h, back) = read_block(bytes.as_slice()).unwrap();
        assert_eq!((h.rows, h.cols, h.seed), (3, 5, 42));
        assert_eq!(back, block);
        // row-major: the first payload pair is block[(0, 0)], the second block[(0, 1)]
        let payload = &bytes[bytes.iter().position(|&b| b == b'\n').unwrap() + 1..];
        assert_eq!(payload.len(), 15 * 16);
        let second_re = f64::from_le_bytes(payload[16..24].try_into().unwrap());
        assert_eq!(second_re, block[(0, 1)].re);
    }

    #[test]
    fn truncated_block_is_an_error() {
        let block = CMatrix::zeros(2, 2);
        let mut bytes = Vec::new();
        write_block(&mut bytes, &block, 1e-8, 0).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(read_block(bytes.as_slice()).is_err());
    }

    #[test]
    fn channel_round_trip() {
        let cfg = ScenarioConfig::reference();
        let ch =
            generate_multipath_channel(&cfg, &ChannelGenConfig::mmwave(4), &mut stream_rng(3, 0))
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ch.json");
        save_channel(&path, &ch).unwrap();
        assert_eq!(load_channel(&path).unwrap(), ch);
    }
}
