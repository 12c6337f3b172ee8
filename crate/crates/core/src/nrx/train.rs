use std::time::Instant;

use rand::Rng;

use crate::channel::{ebno_to_noise_var, ChannelConfig};
use crate::link::random_frame;
use crate::nn::{adamw_step, AdamWConfig, OptimizerState, Tape, Tensor};
use crate::ofdm::FrameConfig;
use crate::rng::{rng_from, split, stream};
use crate::{Error, Result};

use super::{bind, build_model, forward_logits, input_features, token_labels, ModelParams, NeuralReceiverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            batch_size: 32,
            snr_min_db: 0.0,
            snr_max_db: 10.0,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("iterations and batch_size must be at least 1".into()));
        }
        if !(self.snr_min_db <= self.snr_max_db) {
            return Err(Error::InvalidConfig(format!(
                "training SNR range [{}, {}] is empty",
                self.snr_min_db, self.snr_max_db
            )));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Mean BCE over the batch, per iteration.
    pub loss_history: Vec<f64>,
    /// Fraction of data bits whose LLR sign is right, per iteration.
    pub accuracy_history: Vec<f64>,
    pub iteration_seconds: Vec<f64>,
}

impl TrainReport {
    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// Mean loss of the first `n` iterations.
    pub fn initial_loss(&self, n: usize) -> f64 {
        Self::mean(&self.loss_history[..n.min(self.loss_history.len())])
    }

    /// Mean loss of the last `n` iterations.
    pub fn final_loss(&self, n: usize) -> f64 {
        let len = self.loss_history.len();
        Self::mean(&self.loss_history[len - n.min(len)..])
    }
}

pub fn train(
    cfg: &NeuralReceiverConfig,
    frame: &FrameConfig,
    chan: &ChannelConfig,
    tc: &TrainConfig,
    master_seed: u64,
) -> Result<(ModelParams, TrainReport)> {
    train_with_progress(cfg, frame, chan, tc, master_seed, |_, _| {})
}

/// [`train`] with a callback receiving `(iteration, loss)` after each step.
///
/// Iteration `i` draws its SNR uniformly in the training range from
/// `split(seed, [SNR, i])`, and batch element `b` simulates a frame from
/// `split(seed, [i, b])`. Per-element gradients are summed in batch order.
pub fn train_with_progress(
    cfg: &NeuralReceiverConfig,
    frame: &FrameConfig,
    chan: &ChannelConfig,
    tc: &TrainConfig,
    master_seed: u64,
    mut progress: impl FnMut(usize, f64),
) -> Result<(ModelParams, TrainReport)> {
    tc.validate()?;
    frame.validate()?;
    chan.validate(frame)?;
    cfg.check_frame(frame)?;
    if chan.num_rx != cfg.num_rx {
        return Err(Error::InvalidConfig(format!(
            "model expects {} receive antennas, channel has {}",
            cfg.num_rx, chan.num_rx
        )));
    }
    let mut params = build_model(cfg, master_seed)?;
    let mut state = OptimizerState::new(tc.optimizer, params.tensors());
    let mut report = TrainReport::default();

    for it in 0..tc.iterations {
        let started = Instant::now();
        let snr_db = if tc.snr_max_db > tc.snr_min_db {
            rng_from(split(master_seed, &[stream::SNR, it as u64])).random_range(tc.snr_min_db..tc.snr_max_db)
        } else {
            tc.snr_min_db
        };
        let noise_var = ebno_to_noise_var(snr_db, frame.bits_per_symbol, frame.code_rate);

        let mut grads: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut total = 0usize;
        for b in 0..tc.batch_size {
            let lf = random_frame(frame, chan, noise_var, split(master_seed, &[it as u64, b as u64]))?;
            let (labels, mask) = token_labels(&lf.bits, cfg)?;
            let mut tape = Tape::new();
            let vars = bind(&mut tape, &params);
            let fv = tape.leaf(input_features(&lf.rx, noise_var, cfg)?);
            let logits = forward_logits(&mut tape, cfg, &vars, fv)?;
            let loss = tape.bce_with_logits(logits, &labels, Some(&mask))?;
            loss_sum += tape.value(loss).item();

            for ((&l, &y), &w) in tape.value(logits).data().iter().zip(labels.data()).zip(mask.data()) {
                if w > 0.0 {
                    total += 1;
                    if (l > 0.0) == (y > 0.5) {
                        correct += 1;
                    }
                }
            }

            let mut g = tape.backward(loss);
            for (acc, v) in grads.iter_mut().zip(&vars) {
                if let Some(gv) = g.take(*v) {
                    acc.data_mut().iter_mut().zip(gv.data()).for_each(|(a, b)| *a += b);
                }
            }
        }
        let inv = 1.0 / tc.batch_size as f64;
        for g in &mut grads {
            g.data_mut().iter_mut().for_each(|v| *v *= inv);
        }
        let loss = loss_sum * inv;
        if !loss.is_finite() || grads.iter().any(|g| g.data().iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged {
                iteration: it + 1,
                loss,
            });
        }
        adamw_step(params.tensors_mut(), &grads, &mut state)?;

        report.loss_history.push(loss);
        report.accuracy_history.push(correct as f64 / total.max(1) as f64);
        report.iteration_seconds.push(started.elapsed().as_secs_f64());
        progress(it + 1, loss);
    }
    Ok((params, report))
}
