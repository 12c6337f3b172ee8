//! Payload file codecs, transport-block segmentation and reconstruction
//! metrics.
//!
//! Only payload bodies cross the link. Headers and dimensions stay with
//! the sender as [`PayloadMeta`] and are reattached on decode.

mod formats;
mod metrics;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

pub use formats::{GPS_SCALE, WAV_HEADER_LEN};
pub use metrics::{mse, psnr, rmse, MetricKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Image,
    Audio,
    Gps,
    Lidar,
    Radar,
}

impl Modality {
    pub const ALL: [Modality; 5] = [Modality::Image, Modality::Audio, Modality::Gps, Modality::Lidar, Modality::Radar];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Audio => "audio",
            Modality::Gps => "gps",
            Modality::Lidar => "lidar",
            Modality::Radar => "radar",
        }
    }

    /// Metric reported for this modality.
    pub fn metric(self) -> MetricKind {
        match self {
            Modality::Image => MetricKind::Psnr,
            Modality::Gps => MetricKind::Rmse,
            Modality::Audio | Modality::Lidar | Modality::Radar => MetricKind::Mse,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown modality {s:?}")))
    }
}

/// Out-of-band description needed to rebuild a file from its body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PayloadMeta {
    /// Binary PGM (1 channel) or PPM (3 channels), 8-bit samples.
    Image {
        header: Vec<u8>,
        width: usize,
        height: usize,
        channels: usize,
    },
    /// Canonical 44-byte WAV header, PCM16 mono.
    Audio {
        header: Vec<u8>,
        sample_rate: u32,
        num_samples: usize,
    },
    Gps { points: usize },
    Lidar { points: usize },
    /// Complex samples, interleaved I/Q.
    Radar { samples: usize },
}

impl PayloadMeta {
    pub fn modality(&self) -> Modality {
        match self {
            PayloadMeta::Image { .. } => Modality::Image,
            PayloadMeta::Audio { .. } => Modality::Audio,
            PayloadMeta::Gps { .. } => Modality::Gps,
            PayloadMeta::Lidar { .. } => Modality::Lidar,
            PayloadMeta::Radar { .. } => Modality::Radar,
        }
    }

    /// Length of the transmitted body in bytes.
    pub fn body_len(&self) -> usize {
        match self {
            PayloadMeta::Image {
                width,
                height,
                channels,
                ..
            } => width * height * channels,
            PayloadMeta::Audio { num_samples, .. } => 2 * num_samples,
            PayloadMeta::Gps { points } => 8 * points,
            PayloadMeta::Lidar { points } => 12 * points,
            PayloadMeta::Radar { samples } => 8 * samples,
        }
    }
}

/// A parsed payload file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadFrame {
    pub modality: Modality,
    /// Body bytes as transmitted.
    pub raw_bytes: Vec<u8>,
    pub meta: PayloadMeta,
}

impl PayloadFrame {
    pub fn parse(file: &[u8], modality: Modality) -> Result<Self> {
        let (raw_bytes, meta) = match modality {
            Modality::Image => formats::parse_pnm(file)?,
            Modality::Audio => formats::parse_wav(file)?,
            Modality::Gps => formats::parse_gps(file)?,
            Modality::Lidar => formats::parse_f32_records(file, 12, |n| PayloadMeta::Lidar { points: n })?,
            Modality::Radar => formats::parse_f32_records(file, 8, |n| PayloadMeta::Radar { samples: n })?,
        };
        Ok(Self {
            modality,
            raw_bytes,
            meta,
        })
    }

    /// Numeric samples the modality metric is computed on.
    pub fn samples(&self) -> Vec<f64> {
        formats::samples(&self.raw_bytes, &self.meta)
    }
}

/// MSB-first bit expansion.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Inverse of [`bytes_to_bits`]; the length must be a multiple of 8.
pub fn bits_to_bytes(bits: &[u8]) -> Result<Vec<u8>> {
    if bits.len() % 8 != 0 {
        return Err(Error::Framing(format!("{} bits is not a whole number of bytes", bits.len())));
    }
    Ok(bits
        .chunks_exact(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect())
}

/// Parses `file` and serialises its body MSB-first.
pub fn encode_payload(file: &[u8], modality: Modality) -> Result<(Vec<u8>, PayloadMeta)> {
    let frame = PayloadFrame::parse(file, modality)?;
    Ok((bytes_to_bits(&frame.raw_bytes), frame.meta))
}

/// Rebuilds the file from received body bits, applying the corruption
/// policy: non-finite floats become 0.0 and GPS coordinates are clamped to
/// their valid ranges.
pub fn decode_payload(bits: &[u8], meta: &PayloadMeta) -> Result<Vec<u8>> {
    let expected = 8 * meta.body_len();
    if bits.len() != expected {
        return Err(Error::Framing(format!(
            "{} payload bits received, metadata implies {expected}",
            bits.len()
        )));
    }
    let mut body = bits_to_bytes(bits)?;
    formats::sanitize(&mut body, meta);
    Ok(formats::assemble(&body, meta))
}

/// Message blocks of `k` bits; the last one is zero-padded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportBlocks {
    pub blocks: Vec<Vec<u8>>,
    pub pad_bits: usize,
}

pub fn frame_segment(bits: &[u8], k: usize) -> Result<TransportBlocks> {
    if k == 0 {
        return Err(Error::InvalidInput("block size k must be positive".into()));
    }
    let mut blocks: Vec<Vec<u8>> = bits.chunks(k).map(<[u8]>::to_vec).collect();
    let mut pad_bits = 0;
    match blocks.last_mut() {
        Some(last) if last.len() < k => {
            pad_bits = k - last.len();
            last.resize(k, 0);
        }
        Some(_) => {}
        None => {}
    }
    Ok(TransportBlocks { blocks, pad_bits })
}

pub fn frame_reassemble(blocks: &[Vec<u8>], pad_bits: usize) -> Result<Vec<u8>> {
    let total: usize = blocks.iter().map(Vec::len).sum();
    let last = blocks.last().map_or(0, Vec::len);
    if pad_bits > last || (blocks.is_empty() && pad_bits > 0) {
        return Err(Error::Framing(format!("{pad_bits} pad bits exceed the final block")));
    }
    let mut out = Vec::with_capacity(total);
    for b in blocks {
        out.extend_from_slice(b);
    }
    out.truncate(total - pad_bits);
    Ok(out)
}

/// The modality's metric between an original and a reconstructed file
/// sharing `meta`.
pub fn payload_metric(original: &[u8], reconstructed: &[u8], meta: &PayloadMeta) -> Result<f64> {
    let body_of = |file: &[u8]| -> Result<Vec<f64>> {
        let frame = PayloadFrame::parse(file, meta.modality())?;
        if &frame.meta != meta {
            return Err(Error::Metric("file does not match the payload metadata".into()));
        }
        Ok(frame.samples())
    };
    let (a, b) = (body_of(original)?, body_of(reconstructed)?);
    match meta.modality().metric() {
        MetricKind::Psnr => psnr(&a, &b, 255.0),
        MetricKind::Mse => mse(&a, &b),
        MetricKind::Rmse => rmse(&a, &b),
    }
}

#[cfg(test)]
mod tests;
