//! Delay alignment modulation (DAM) for integrated sensing and communication.
//!
//! The crate simulates a monostatic multi-antenna node that serves a
//! single-antenna user over a sparse wideband channel with DAM while sensing
//! one point target with the same waveform:
//!
//! * [`channel`]: ULA steering vectors, the multipath MISO channel and the
//!   round-trip radar channel.
//! * [`waveform`]: delay schedules, DAM block synthesis, SNR, ISI and PAPR.
//! * [`sensing`]: matched-filter delay-Doppler processing and sensing SNR.
//! * [`beamforming`]: nullspace projectors, closed-form ZF beamformers and
//!   the successive convex approximation solver for the joint design.
//! * [`ofdm`]: the MISO-OFDM radar reference used for comparison.
//! * [`experiment`]: configuration loading and the batch experiment drivers
//!   behind the `damisac` binary.

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod io;
pub mod math;
pub mod ofdm;
pub mod sensing;
pub mod waveform;

pub use error::{Error, Result};
