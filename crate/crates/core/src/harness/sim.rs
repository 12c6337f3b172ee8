//! Monte Carlo link simulation and BER sweeps.

use std::fmt::Write as _;

use crate::channel::ebno_to_noise_var;
use crate::ldpc::LdpcCode;
use crate::link::{random_bits, transmit, PILOT_SEED};
use crate::mapping::LlrGrid;
use crate::nrx::{nr_forward, ModelParams, NeuralReceiverConfig};
use crate::ofdm::ReceivedGrid;
use crate::receiver::{baseline_receive, perfect_csi_receive};
use crate::channel::ChannelRealization;
use crate::rng::{split, stream};
use crate::{Error, Result};

use super::{ExperimentConfig, ReceiverKind};

pub const BER_HEADER: &str = "snr_db,receiver,bits,bit_errors,ber,blocks,block_errors,bler,ci95";

/// A trained neural receiver together with the config it was built for.
#[derive(Debug, Clone)]
pub struct NeuralModel {
    pub config: NeuralReceiverConfig,
    pub params: ModelParams,
}

/// Noise variance for an Eb/N0 point; `+inf` dB is noiseless.
pub fn noise_var_for(cfg: &ExperimentConfig, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        ebno_to_noise_var(snr_db, cfg.frame.bits_per_symbol, cfg.frame.code_rate)
    }
}

/// Everything needed to turn message bits into frames and back.
pub struct Link<'a> {
    pub cfg: &'a ExperimentConfig,
    code: Option<LdpcCode>,
    model: Option<&'a NeuralModel>,
}

impl<'a> Link<'a> {
    pub fn new(cfg: &'a ExperimentConfig, model: Option<&'a NeuralModel>) -> Result<Self> {
        cfg.validate()?;
        if cfg.receivers.contains(&ReceiverKind::Neural) {
            let m = model.ok_or_else(|| Error::InvalidConfig("the neural receiver needs a checkpoint".into()))?;
            m.config.check_frame(&cfg.frame)?;
            if m.config.num_rx != cfg.channel.num_rx {
                return Err(Error::CheckpointMismatch(format!(
                    "checkpoint expects {} receive antennas, config has {}",
                    m.config.num_rx, cfg.channel.num_rx
                )));
            }
        }
        let code = if cfg.uncoded() {
            None
        } else {
            Some(LdpcCode::regular(cfg.codeword_len, cfg.code_seed)?)
        };
        Ok(Self { cfg, code, model })
    }

    pub fn code(&self) -> Option<&LdpcCode> {
        self.code.as_ref()
    }

    /// Message bits per block: `k` of the code, or a whole frame uncoded.
    pub fn block_bits(&self) -> usize {
        self.code.as_ref().map_or(self.cfg.frame.data_bits(), LdpcCode::k)
    }

    /// Blocks carried by one frame.
    pub fn blocks_per_frame(&self) -> usize {
        self.code
            .as_ref()
            .map_or(1, |c| self.cfg.frame.data_bits() / c.n())
    }

    /// Encodes up to `blocks_per_frame` message blocks into one frame's data
    /// bits; the unused tail is filled with random bits from `seed`.
    pub fn frame_bits(&self, blocks: &[Vec<u8>], seed: u64) -> Result<Vec<u8>> {
        let mut bits = Vec::with_capacity(self.cfg.frame.data_bits());
        for b in blocks {
            match &self.code {
                Some(code) => bits.extend(code.encode(b)?),
                None => bits.extend_from_slice(b),
            }
        }
        let fill = self.cfg.frame.data_bits() - bits.len();
        bits.extend(random_bits(fill, split(seed, &[stream::BITS, 1])));
        Ok(bits)
    }

    pub fn receive(&self, kind: ReceiverKind, rx: &ReceivedGrid, chan: &ChannelRealization) -> Result<LlrGrid> {
        match kind {
            ReceiverKind::Baseline => baseline_receive(rx, &self.cfg.frame, PILOT_SEED),
            ReceiverKind::PerfectCsi => perfect_csi_receive(rx, chan, &self.cfg.frame),
            ReceiverKind::Neural => {
                let m = self
                    .model
                    .ok_or_else(|| Error::InvalidConfig("the neural receiver needs a checkpoint".into()))?;
                nr_forward(rx, rx.noise_var, &m.params, &m.config)
            }
        }
    }

    /// Recovers `count` message blocks from frame LLRs.
    pub fn decode_blocks(&self, llrs: &LlrGrid, count: usize) -> Result<Vec<Vec<u8>>> {
        let k = self.block_bits();
        match &self.code {
            Some(code) => llrs
                .values
                .chunks_exact(code.n())
                .take(count)
                .map(|w| code.decode(w, self.cfg.ldpc_max_iter).map(|o| o.message))
                .collect(),
            None => Ok(llrs.hard_bits().chunks_exact(k).take(count).map(<[u8]>::to_vec).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub receiver: ReceiverKind,
    pub bits: u64,
    pub bit_errors: u64,
    pub blocks: u64,
    pub block_errors: u64,
    pub frames: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn bler(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.block_errors as f64 / self.blocks as f64
        }
    }

    /// Normal-approximation 95% half-width of the BER.
    pub fn ci95(&self) -> f64 {
        if self.bits == 0 {
            return 0.0;
        }
        let p = self.ber();
        1.96 * (p * (1.0 - p) / self.bits as f64).sqrt()
    }
}

/// Runs every configured receiver on the same frames at each SNR point.
/// Frame `f` of point `i` is simulated from `split(seed, [i, f])`.
///
/// A point stops after `frames_per_point` frames once every receiver has
/// seen `target_bit_errors`, and never exceeds `max_frames_per_point`.
pub fn run_ber_sweep(cfg: &ExperimentConfig, model: Option<&NeuralModel>, seed: u64) -> Result<Vec<BerPoint>> {
    let link = Link::new(cfg, model)?;
    let per_frame = link.blocks_per_frame();
    let k = link.block_bits();
    let budget = cfg.max_frames_per_point.max(cfg.frames_per_point);
    let mut out = Vec::new();

    for (pi, &snr_db) in cfg.snr_points_db.iter().enumerate() {
        let noise_var = noise_var_for(cfg, snr_db);
        let mut points: Vec<BerPoint> = cfg
            .receivers
            .iter()
            .map(|&receiver| BerPoint {
                snr_db,
                receiver,
                bits: 0,
                bit_errors: 0,
                blocks: 0,
                block_errors: 0,
                frames: 0,
            })
            .collect();
        for f in 0..budget {
            let done = points.iter().all(|p| p.bit_errors >= cfg.target_bit_errors);
            if f >= cfg.frames_per_point && done {
                break;
            }
            let frame_seed = split(seed, &[pi as u64, f as u64]);
            let msg_seed = split(frame_seed, &[stream::BITS]);
            let blocks: Vec<Vec<u8>> = (0..per_frame)
                .map(|b| random_bits(k, split(msg_seed, &[b as u64])))
                .collect();
            let bits = link.frame_bits(&blocks, frame_seed)?;
            let lf = transmit(bits, &cfg.frame, &cfg.channel, noise_var, frame_seed)?;
            for p in &mut points {
                let llrs = link.receive(p.receiver, &lf.rx, &lf.channel)?;
                let decoded = link.decode_blocks(&llrs, per_frame)?;
                for (sent, got) in blocks.iter().zip(&decoded) {
                    let errs = sent.iter().zip(got).filter(|(a, b)| a != b).count() as u64;
                    p.bit_errors += errs;
                    p.block_errors += u64::from(errs > 0);
                }
                p.bits += (per_frame * k) as u64;
                p.blocks += per_frame as u64;
                p.frames += 1;
            }
        }
        out.extend(points);
    }
    Ok(out)
}

pub fn format_snr(snr_db: f64) -> String {
    if snr_db == f64::INFINITY {
        "inf".into()
    } else {
        format!("{snr_db}")
    }
}

pub fn ber_csv(points: &[BerPoint]) -> String {
    let mut s = String::from(BER_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            format_snr(p.snr_db),
            p.receiver,
            p.bits,
            p.bit_errors,
            p.ber(),
            p.blocks,
            p.block_errors,
            p.bler(),
            p.ci95()
        );
    }
    s
}

/// Receivers whose BER rises between consecutive SNR points by more than
/// the combined confidence intervals.
pub fn monotonicity_violations(points: &[BerPoint]) -> Vec<String> {
    let mut out = Vec::new();
    let mut receivers: Vec<ReceiverKind> = points.iter().map(|p| p.receiver).collect();
    receivers.sort();
    receivers.dedup();
    for r in receivers {
        let mut series: Vec<&BerPoint> = points.iter().filter(|p| p.receiver == r).collect();
        series.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        for w in series.windows(2) {
            if w[1].ber() > w[0].ber() + w[0].ci95() + w[1].ci95() {
                out.push(format!(
                    "{r}: BER rises from {} at {} dB to {} at {} dB",
                    w[0].ber(),
                    format_snr(w[0].snr_db),
                    w[1].ber(),
                    format_snr(w[1].snr_db)
                ));
            }
        }
    }
    out
}
