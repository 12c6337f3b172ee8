//! Multi-modal payload transmission over the simulated link.

use std::fmt::Write as _;

use crate::payload::{bits_to_bytes, decode_payload, encode_payload, frame_reassemble, frame_segment, mse, MetricKind, Modality, PayloadFrame};
use crate::rng::split;
use crate::link::transmit;
use crate::Result;

use super::sim::{format_snr, noise_var_for, Link, NeuralModel};
use super::{ExperimentConfig, ReceiverKind};

pub const PAYLOAD_HEADER: &str = "modality,snr_db,receiver,metric_name,metric_value";

/// Stream index separating payload frames from BER-sweep frames.
const PAYLOAD_STREAM: u64 = 0x50_41_59;

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadPoint {
    pub modality: Modality,
    pub snr_db: f64,
    pub receiver: ReceiverKind,
    /// Sample MSE of each trial (pixels, normalised audio, degrees or
    /// float values).
    pub trial_mse: Vec<f64>,
    /// Reconstructed files, one per trial.
    pub byte_identical: Vec<bool>,
}

impl PayloadPoint {
    pub fn mean_mse(&self) -> f64 {
        self.trial_mse.iter().sum::<f64>() / self.trial_mse.len() as f64
    }

    /// 95% half-width of the mean MSE over trials.
    pub fn mse_ci95(&self) -> f64 {
        let n = self.trial_mse.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_mse();
        let var = self.trial_mse.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    }

    pub fn metric(&self) -> MetricKind {
        self.modality.metric()
    }

    /// The modality's metric computed from the mean MSE.
    pub fn metric_value(&self) -> f64 {
        let m = self.mean_mse();
        match self.metric() {
            MetricKind::Mse => m,
            MetricKind::Rmse => m.sqrt(),
            MetricKind::Psnr if m == 0.0 => f64::INFINITY,
            MetricKind::Psnr => 10.0 * (255.0f64 * 255.0 / m).log10(),
        }
    }

    pub fn at_sentinel(&self) -> bool {
        self.mean_mse() == 0.0
    }
}

/// Sends every payload `payload_trials` times at each SNR point through
/// every configured receiver. All receivers see the same frames.
pub fn run_payload_eval(
    cfg: &ExperimentConfig,
    payloads: &[(Modality, Vec<u8>)],
    model: Option<&NeuralModel>,
    seed: u64,
) -> Result<Vec<PayloadPoint>> {
    let link = Link::new(cfg, model)?;
    let k = link.block_bits();
    let per_frame = link.blocks_per_frame();
    let mut out = Vec::new();

    for (mi, (modality, file)) in payloads.iter().enumerate() {
        let original = PayloadFrame::parse(file, *modality)?;
        let reference = original.samples();
        let (bits, meta) = encode_payload(file, *modality)?;
        let segments = frame_segment(&bits, k)?;

        for (si, &snr_db) in cfg.snr_points_db.iter().enumerate() {
            let noise_var = noise_var_for(cfg, snr_db);
            let mut points: Vec<PayloadPoint> = cfg
                .receivers
                .iter()
                .map(|&receiver| PayloadPoint {
                    modality: *modality,
                    snr_db,
                    receiver,
                    trial_mse: Vec::new(),
                    byte_identical: Vec::new(),
                })
                .collect();
            for trial in 0..cfg.payload_trials {
                let mut received: Vec<Vec<Vec<u8>>> = vec![Vec::new(); points.len()];
                for (fi, group) in segments.blocks.chunks(per_frame).enumerate() {
                    let frame_seed = split(seed, &[PAYLOAD_STREAM, mi as u64, si as u64, trial as u64, fi as u64]);
                    let frame_bits = link.frame_bits(group, frame_seed)?;
                    let lf = transmit(frame_bits, &cfg.frame, &cfg.channel, noise_var, frame_seed)?;
                    for (p, got) in points.iter().zip(&mut received) {
                        let llrs = link.receive(p.receiver, &lf.rx, &lf.channel)?;
                        got.extend(link.decode_blocks(&llrs, group.len())?);
                    }
                }
                for (p, got) in points.iter_mut().zip(&received) {
                    let rx_bits = frame_reassemble(got, segments.pad_bits)?;
                    let rebuilt = decode_payload(&rx_bits, &meta)?;
                    let body = bits_to_bytes(&rx_bits)?;
                    let decoded = PayloadFrame::parse(&rebuilt, *modality)?;
                    p.trial_mse.push(mse(&reference, &decoded.samples())?);
                    p.byte_identical.push(rebuilt == *file && body == original.raw_bytes);
                }
            }
            out.extend(points);
        }
    }
    Ok(out)
}

/// Smallest swept SNR whose metric is at its perfect-reconstruction value.
pub fn min_snr_to_sentinel(points: &[PayloadPoint], modality: Modality, receiver: ReceiverKind) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.modality == modality && p.receiver == receiver && p.at_sentinel())
        .map(|p| p.snr_db)
        .min_by(f64::total_cmp)
}

/// One row per point, then one `snr_db = all` row per modality and
/// receiver giving `min_snr_to_sentinel` (`none` if never reached).
pub fn payload_csv(points: &[PayloadPoint]) -> String {
    let mut s = String::from(PAYLOAD_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.modality,
            format_snr(p.snr_db),
            p.receiver,
            p.metric().name(),
            p.metric_value()
        );
    }
    let mut pairs: Vec<(Modality, ReceiverKind)> = Vec::new();
    for p in points {
        if !pairs.contains(&(p.modality, p.receiver)) {
            pairs.push((p.modality, p.receiver));
        }
    }
    for (m, r) in pairs {
        let v = min_snr_to_sentinel(points, m, r).map_or("none".to_string(), format_snr);
        let _ = writeln!(s, "{m},all,{r},min_snr_to_sentinel,{v}");
    }
    s
}

/// Points whose mean MSE rises with SNR by more than the combined CI.
pub fn mse_monotonicity_violations(points: &[PayloadPoint]) -> Vec<String> {
    let mut out = Vec::new();
    let mut keys: Vec<(Modality, ReceiverKind)> = points.iter().map(|p| (p.modality, p.receiver)).collect();
    keys.sort();
    keys.dedup();
    for (m, r) in keys {
        let mut series: Vec<&PayloadPoint> = points.iter().filter(|p| p.modality == m && p.receiver == r).collect();
        series.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        for w in series.windows(2) {
            if w[1].mean_mse() > w[0].mean_mse() + w[0].mse_ci95() + w[1].mse_ci95() {
                out.push(format!(
                    "{m}/{r}: MSE rises from {} at {} dB to {} at {} dB",
                    w[0].mean_mse(),
                    format_snr(w[0].snr_db),
                    w[1].mean_mse(),
                    format_snr(w[1].snr_db)
                ));
            }
        }
    }
    out
}
