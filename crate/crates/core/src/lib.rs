//! Link-level simulator for an OFDM SIMO uplink.
//!
//! The transmit chain is LDPC encoding, Gray QAM mapping, a resource grid
//! with whole-symbol pilots and OFDM modulation. The channel is a Rayleigh
//! tapped delay line with Jakes Doppler. Two receivers turn the received
//! frequency-domain grid into bit LLRs:
//!
//! - [`receiver`]: LS channel estimation, linear time interpolation, MMSE
//!   combining and exact soft demapping.
//! - [`nrx`]: a transformer encoder that maps the grid (plus noise power)
//!   straight to LLRs, trained with binary cross-entropy through the
//!   reverse-mode engine in [`nn`].
//!
//! LLRs everywhere in this crate are `log P(b = 1) / P(b = 0)`: positive
//! values favour a one bit.
//!
//! [`harness`] wires everything into BER sweeps, architecture sweeps and
//! multi-modal payload evaluation, and [`payload`] holds the file codecs and
//! reconstruction metrics.

pub mod channel;
pub mod error;
pub mod harness;
pub mod ldpc;
pub mod link;
pub mod mapping;
pub mod nn;
pub mod nrx;
pub mod ofdm;
pub mod payload;
pub mod receiver;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;
