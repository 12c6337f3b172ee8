//! One-frame transmission shared by the training loop and the harness.

use rand::Rng;

use crate::channel::{generate_channel, ChannelConfig, ChannelRealization};
use crate::mapping::qam_map;
use crate::ofdm::{apply_channel_freq, build_grid, FrameConfig, ReceivedGrid, ResourceGrid};
use crate::rng::{rng_from, split, stream};
use crate::Result;

/// Seed of the pilot sequence known to both ends of the link.
pub const PILOT_SEED: u64 = 0x5EED_0001;

#[derive(Debug, Clone)]
pub struct LinkFrame {
    /// Bits carried by the data REs, in RE order.
    pub bits: Vec<u8>,
    pub grid: ResourceGrid,
    pub channel: ChannelRealization,
    pub rx: ReceivedGrid,
}

pub fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = rng_from(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Maps `bits` onto the data REs and passes the grid through a fresh
/// channel realization and noise, both derived from `frame_seed`.
pub fn transmit(
    bits: Vec<u8>,
    frame: &FrameConfig,
    chan: &ChannelConfig,
    noise_var: f64,
    frame_seed: u64,
) -> Result<LinkFrame> {
    let symbols = qam_map(&bits, &frame.constellation()?)?;
    let grid = build_grid(&symbols, frame, PILOT_SEED)?;
    let channel = generate_channel(chan, frame, split(frame_seed, &[stream::CHANNEL]))?;
    let rx = apply_channel_freq(&grid, &channel, noise_var, split(frame_seed, &[stream::NOISE]))?;
    Ok(LinkFrame { bits, grid, channel, rx })
}

/// [`transmit`] with uniformly random payload bits from `frame_seed`.
pub fn random_frame(frame: &FrameConfig, chan: &ChannelConfig, noise_var: f64, frame_seed: u64) -> Result<LinkFrame> {
    let bits = random_bits(frame.data_bits(), split(frame_seed, &[stream::BITS]));
    transmit(bits, frame, chan, noise_var, frame_seed)
}
