//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma
//! separated. Every key has a default, so an empty file is valid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::channel::{kmh_to_mps, ChannelConfig, ChannelProfile, DopplerModel};
use crate::ldpc::DEFAULT_MAX_ITER;
use crate::nrx::{NeuralReceiverConfig, TrainConfig};
use crate::ofdm::FrameConfig;
use crate::payload::Modality;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReceiverKind {
    Baseline,
    PerfectCsi,
    Neural,
}

impl ReceiverKind {
    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Baseline => "baseline",
            ReceiverKind::PerfectCsi => "perfect_csi_baseline",
            ReceiverKind::Neural => "neural",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "baseline" => Ok(ReceiverKind::Baseline),
            "perfect_csi_baseline" | "perfect_csi" => Ok(ReceiverKind::PerfectCsi),
            "neural" => Ok(ReceiverKind::Neural),
            other => Err(Error::InvalidConfig(format!(
                "unknown receiver {other:?} (baseline, perfect_csi_baseline, neural)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub frame: FrameConfig,
    pub channel: ChannelConfig,
    pub codeword_len: usize,
    /// Seed of the parity-check matrix construction.
    pub code_seed: u64,
    pub ldpc_max_iter: usize,
    /// Eb/N0 per receive antenna; `inf` means noiseless.
    pub snr_points_db: Vec<f64>,
    pub frames_per_point: usize,
    pub target_bit_errors: u64,
    pub max_frames_per_point: usize,
    pub receivers: Vec<ReceiverKind>,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub ffn_dim: usize,
    pub train: TrainConfig,
    pub arch_blocks: Vec<usize>,
    pub arch_heads: Vec<usize>,
    pub payload_files: Vec<(Modality, PathBuf)>,
    pub payload_trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            channel: ChannelConfig::default(),
            codeword_len: 1024,
            code_seed: 7,
            ldpc_max_iter: DEFAULT_MAX_ITER,
            snr_points_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            frames_per_point: 10,
            target_bit_errors: 100,
            max_frames_per_point: 100,
            receivers: vec![ReceiverKind::Baseline],
            num_blocks: 4,
            num_heads: 8,
            embed_dim: 128,
            ffn_dim: 128,
            train: TrainConfig::default(),
            arch_blocks: vec![2, 4, 6, 8, 10],
            arch_heads: vec![2, 4, 8],
            payload_files: Vec::new(),
            payload_trials: 1,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// True when `code_rate` is 1: frames carry raw bits with no LDPC code.
    pub fn uncoded(&self) -> bool {
        self.frame.code_rate == 1.0
    }

    pub fn model_config(&self) -> NeuralReceiverConfig {
        NeuralReceiverConfig {
            num_blocks: self.num_blocks,
            num_heads: self.num_heads,
            embed_dim: self.embed_dim,
            ffn_dim: self.ffn_dim,
            ..NeuralReceiverConfig::for_frame(&self.frame, self.channel.num_rx)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.channel.validate(&self.frame)?;
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.snr_points_db.is_empty() {
            return fail("snr_points_db must not be empty".into());
        }
        if self.snr_points_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return fail("snr_points_db values must be numbers or inf".into());
        }
        if self.frames_per_point == 0 || self.max_frames_per_point == 0 {
            return fail("frames_per_point and max_frames_per_point must be at least 1".into());
        }
        if self.receivers.is_empty() {
            return fail("receiver list must not be empty".into());
        }
        if self.payload_trials == 0 {
            return fail("payload_trials must be at least 1".into());
        }
        if !self.uncoded() {
            if self.frame.code_rate != 0.5 {
                return fail(format!(
                    "code_rate {} unsupported: use 0.5 for the (3,6) LDPC code or 1 for uncoded",
                    self.frame.code_rate
                ));
            }
            if self.codeword_len > self.frame.data_bits() {
                return fail(format!(
                    "codeword_len {} exceeds the {} data bits of one frame",
                    self.codeword_len,
                    self.frame.data_bits()
                ));
            }
            if self.ldpc_max_iter == 0 {
                return fail("ldpc_max_iter must be at least 1".into());
            }
        }
        self.train.validate()?;
        self.model_config().validate()?;
        if self.arch_blocks.is_empty() || self.arch_heads.is_empty() {
            return fail("arch_blocks and arch_heads must not be empty".into());
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut cfg = ExperimentConfig::default();
        let mut tap_delays: Option<(usize, Vec<usize>)> = None;
        let mut tap_powers: Option<(usize, Vec<f64>)> = None;
        let mut profile: Option<(usize, String)> = None;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), line_no) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("key {key} already set on line {prev}"),
                });
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let num = |v: &str| -> Result<f64> {
                match v.trim() {
                    "inf" | "+inf" => Ok(f64::INFINITY),
                    s => s
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| err(format!("{key}: {s:?} is not a number"))),
                }
            };
            let int = |v: &str| -> Result<u64> {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| err(format!("{key}: {:?} is not a non-negative integer", v.trim())))
            };
            let list = |v: &str| -> Vec<String> {
                v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            };
            let usize_list = |v: &str| -> Result<Vec<usize>> {
                list(v).iter().map(|s| int(s).map(|x| x as usize)).collect()
            };
            let boolean = |v: &str| -> Result<bool> {
                match v {
                    "true" | "yes" | "1" => Ok(true),
                    "false" | "no" | "0" => Ok(false),
                    _ => Err(err(format!("{key}: {v:?} is not a boolean"))),
                }
            };

            match key {
                "num_symbols" => cfg.frame.num_symbols = int(value)? as usize,
                "fft_size" => cfg.frame.fft_size = int(value)? as usize,
                "subcarrier_spacing_hz" => cfg.frame.subcarrier_spacing = num(value)?,
                "cp_len" => cfg.frame.cp_len = int(value)? as usize,
                "pilot_symbols" => cfg.frame.pilot_symbols = usize_list(value)?,
                "modulation_order" => {
                    cfg.frame.bits_per_symbol = match int(value)? {
                        4 => 2,
                        16 => 4,
                        64 => 6,
                        m => return Err(err(format!("modulation_order {m} unsupported (4, 16, 64)"))),
                    }
                }
                "code_rate" => cfg.frame.code_rate = num(value)?,
                "codeword_len" => cfg.codeword_len = int(value)? as usize,
                "code_seed" => cfg.code_seed = int(value)?,
                "ldpc_max_iter" => cfg.ldpc_max_iter = int(value)? as usize,
                "num_rx" => cfg.channel.num_rx = int(value)? as usize,
                "carrier_freq_hz" => cfg.channel.carrier_freq = num(value)?,
                "speed_kmh" => cfg.channel.speed_mps = kmh_to_mps(num(value)?),
                "doppler_model" => {
                    cfg.channel.doppler = match value {
                        "jakes" => DopplerModel::Jakes,
                        "static" => DopplerModel::Static,
                        _ => return Err(err(format!("doppler_model {value:?} (jakes, static)"))),
                    }
                }
                "block_fading" => cfg.channel.block_fading = boolean(value)?,
                "channel_profile" => profile = Some((line_no, value.to_string())),
                "tap_delays" => tap_delays = Some((line_no, usize_list(value)?)),
                "tap_powers" => tap_powers = Some((line_no, list(value).iter().map(|s| num(s)).collect::<Result<_>>()?)),
                "snr_points_db" => cfg.snr_points_db = list(value).iter().map(|s| num(s)).collect::<Result<_>>()?,
                "frames_per_point" => cfg.frames_per_point = int(value)? as usize,
                "target_bit_errors" => cfg.target_bit_errors = int(value)?,
                "max_frames_per_point" => cfg.max_frames_per_point = int(value)? as usize,
                "receiver" => {
                    cfg.receivers = list(value)
                        .iter()
                        .map(|s| s.parse().map_err(|e: Error| err(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "num_blocks" => cfg.num_blocks = int(value)? as usize,
                "num_heads" => cfg.num_heads = int(value)? as usize,
                "embed_dim" => cfg.embed_dim = int(value)? as usize,
                "ffn_dim" => cfg.ffn_dim = int(value)? as usize,
                "learning_rate" => cfg.train.optimizer.lr = num(value)?,
                "weight_decay" => cfg.train.optimizer.weight_decay = num(value)?,
                "batch_size" => cfg.train.batch_size = int(value)? as usize,
                "iterations" => cfg.train.iterations = int(value)? as usize,
                "snr_train_min_db" => cfg.train.snr_min_db = num(value)?,
                "snr_train_max_db" => cfg.train.snr_max_db = num(value)?,
                "arch_blocks" => cfg.arch_blocks = usize_list(value)?,
                "arch_heads" => cfg.arch_heads = usize_list(value)?,
                "payload_files" => {
                    cfg.payload_files = list(value)
                        .iter()
                        .map(|item| parse_payload_spec(item).map_err(|e| err(e.to_string())))
                        .collect::<Result<_>>()?
                }
                "payload_trials" => cfg.payload_trials = int(value)? as usize,
                "seed" => cfg.seed = int(value)?,
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }

        let at = |line: usize, msg: String| Error::Parse { line, msg };
        if let Some((line, name)) = profile {
            cfg.channel.profile = match name.as_str() {
                "tdl" => ChannelProfile::default(),
                "flat_rayleigh" | "flat" => ChannelProfile::flat_rayleigh(),
                "awgn" => ChannelProfile::Awgn,
                _ => return Err(at(line, format!("channel_profile {name:?} (tdl, flat_rayleigh, awgn)"))),
            };
        }
        match (tap_delays, tap_powers) {
            (None, None) => {}
            (Some((line, delays)), powers) => {
                if matches!(cfg.channel.profile, ChannelProfile::Awgn) {
                    return Err(at(line, "tap_delays given with channel_profile = awgn".into()));
                }
                cfg.channel.profile = match powers {
                    Some((_, p)) => ChannelProfile::Tdl { delays, powers: p },
                    None => ChannelProfile::exponential(delays, ChannelProfile::DEFAULT_DECAY),
                };
            }
            (None, Some((line, _))) => return Err(at(line, "tap_powers requires tap_delays".into())),
        }
        Ok(cfg)
    }
}

/// `modality:path`
pub fn parse_payload_spec(item: &str) -> Result<(Modality, PathBuf)> {
    let (m, path) = item
        .split_once(':')
        .ok_or_else(|| Error::InvalidConfig(format!("payload {item:?} must be modality:path")))?;
    Ok((m.parse()?, PathBuf::from(path.trim())))
}
