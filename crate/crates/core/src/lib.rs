//! Simulation and analysis toolkit for atomic frequency comb (AFC) quantum
//! memories operating on time-bin qubits.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`] builds comb absorption profiles and their causal transfer
//!   functions on a discrete frequency grid.
//! - [`propagation`] filters photon wavepackets through a transfer function,
//!   extracts echoes, and carries the discrete-ensemble rephasing oracle.
//! - [`qubit`] encodes time-bin qubits and turns a superposition of two combs
//!   into a projection analyzer.
//! - [`montecarlo`] runs the photon-counting experiment (pair source, losses,
//!   gated detectors, dead time, TDC histograms).
//! - [`analysis`] converts window counts into fidelities, visibilities,
//!   signal-to-noise ratios and bound verdicts.
//! - [`cli`] ties everything to a config file and writes run artifacts.

pub mod analysis;
pub mod cli;
mod error;
mod fft;
pub mod montecarlo;
mod optimize;
pub mod propagation;
pub mod qubit;
pub mod spectral;

pub use error::{Error, Result};
