//! Simulation and detection toolkit for UWB secure ranging.
//!
//! The crate models a full double-sided two-way ranging (DS-TWR) exchange at
//! sample level: frame synthesis, reciprocal multipath channels, STS-based
//! channel impulse response (CIR) estimation with back-search leading-edge
//! timestamping, and a Ghost Peak attacker that overlays a forged,
//! high-power STS on one direction of the exchange.
//!
//! Detection relies on channel reciprocity. Both ranging sides compress their
//! STS-derived CIR with the encoder half of a trained MLP autoencoder, quantize
//! the latent features to Gray-coded bits and exchange them in the Response
//! payload. A Hamming distance at or above a calibrated threshold flags the
//! round as attacked and suspends ranging.
//!
//! Module map:
//! - [`signal`]: frame and STS synthesis, pulse shaping
//! - [`channel`]: Saleh–Valenzuela realizations, propagation and AWGN
//! - [`receiver`]: CIR estimation, leading edge, DS-TWR distance
//! - [`attacker`]: Ghost Peak injection
//! - [`autoencoder`]: MLP autoencoder, training, gradient check, complexity
//! - [`detector`]: quantizer, Hamming distance, threshold, decision
//! - [`harness`]: rounds, campaigns, datasets, sweeps and reports

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacker;
pub mod autoencoder;
pub mod channel;
pub mod detector;
mod dsp;
pub mod error;
pub mod harness;
pub mod model_file;
pub mod par;
pub mod receiver;
pub mod signal;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
