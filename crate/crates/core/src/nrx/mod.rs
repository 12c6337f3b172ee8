//! Transformer-encoder neural receiver.
//!
//! Every resource element of the received grid becomes one token. A token
//! carries the real and imaginary parts of the sample at each receive
//! antenna, `log10(σ²)` and a pilot flag. The tokens pass through an input
//! dense layer, a learned symbol-plus-subcarrier positional embedding,
//! `num_blocks` pre-norm encoder blocks, a final layer norm and an output
//! dense layer giving `m` LLRs per token. Pilot-token outputs are dropped.

mod checkpoint;
mod train;

use rand::Rng;

use crate::mapping::LlrGrid;
use crate::nn::{
    grad_check, linear, multi_head_attention, AttentionParams, CheckResult, Tape, Tensor, Var, GRADCHECK_STEP,
};
use crate::ofdm::{FrameConfig, ReceivedGrid};
use crate::rng::{rng_from, split, stream};
use crate::{Error, Result};

pub use checkpoint::{checkpoint_bytes, load_checkpoint, parse_checkpoint, load_checkpoint_for, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train, train_with_progress, TrainConfig, TrainReport};

/// Floor applied to the noise variance before taking its logarithm.
pub const MIN_NOISE_FEATURE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralReceiverConfig {
    pub num_blocks: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub ffn_dim: usize,
    pub bits_per_symbol: usize,
    pub num_rx: usize,
    pub num_symbols: usize,
    pub fft_size: usize,
    pub pilot_symbols: Vec<usize>,
}

impl Default for NeuralReceiverConfig {
    fn default() -> Self {
        Self::for_frame(&FrameConfig::default(), 2)
    }
}

impl NeuralReceiverConfig {
    /// Four blocks, eight heads and 128-wide embedding and feed-forward
    /// layers, shaped for `frame` received on `num_rx` antennas.
    pub fn for_frame(frame: &FrameConfig, num_rx: usize) -> Self {
        Self {
            num_blocks: 4,
            num_heads: 8,
            embed_dim: 128,
            ffn_dim: 128,
            bits_per_symbol: frame.bits_per_symbol,
            num_rx,
            num_symbols: frame.num_symbols,
            fft_size: frame.fft_size,
            pilot_symbols: frame.pilot_symbols.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.num_blocks == 0 {
            return fail("num_blocks must be at least 1".into());
        }
        if self.num_heads == 0 || self.embed_dim % self.num_heads != 0 {
            return fail(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            ));
        }
        if self.ffn_dim == 0 || self.bits_per_symbol == 0 || self.num_rx == 0 {
            return fail("ffn_dim, bits_per_symbol and num_rx must be positive".into());
        }
        if self.num_symbols == 0 || self.fft_size == 0 {
            return fail("empty grid".into());
        }
        if self.pilot_symbols.iter().any(|&p| p >= self.num_symbols) {
            return fail("pilot symbol outside the grid".into());
        }
        Ok(())
    }

    /// Per-token input width: two values per antenna, noise power, pilot flag.
    pub fn input_features(&self) -> usize {
        2 * self.num_rx + 2
    }

    pub fn num_tokens(&self) -> usize {
        self.num_symbols * self.fft_size
    }

    /// Checks that `frame` has the grid this model was built for.
    pub fn check_frame(&self, frame: &FrameConfig) -> Result<()> {
        if frame.num_symbols != self.num_symbols
            || frame.fft_size != self.fft_size
            || frame.bits_per_symbol != self.bits_per_symbol
            || frame.pilot_symbols != self.pilot_symbols
        {
            return Err(Error::Shape {
                op: "neural receiver frame",
                lhs: vec![self.num_symbols, self.fft_size, self.bits_per_symbol],
                rhs: vec![frame.num_symbols, frame.fft_size, frame.bits_per_symbol],
            });
        }
        Ok(())
    }

    fn is_pilot(&self, token: usize) -> bool {
        self.pilot_symbols.contains(&(token / self.fft_size))
    }
}

/// Kind of initialisation for one named tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// `U(±1/√fan_in)`
    FanIn(usize),
    Zeros,
    Ones,
}

#[derive(Debug, Clone, Copy)]
struct BlockSlots {
    ln1_gain: usize,
    ln1_bias: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln2_gain: usize,
    ln2_bias: usize,
    ffn_w1: usize,
    ffn_b1: usize,
    ffn_w2: usize,
    ffn_b2: usize,
}

/// Positions of every tensor in the parameter list.
#[derive(Debug, Clone)]
struct Layout {
    specs: Vec<(String, Vec<usize>, Init)>,
    input_w: usize,
    input_b: usize,
    pos_symbol: usize,
    pos_subcarrier: usize,
    blocks: Vec<BlockSlots>,
    final_gain: usize,
    final_bias: usize,
    output_w: usize,
    output_b: usize,
}

impl Layout {
    fn new(cfg: &NeuralReceiverConfig) -> Self {
        let (e, f) = (cfg.embed_dim, cfg.ffn_dim);
        let mut specs = Vec::new();
        let mut add = |name: String, shape: Vec<usize>, init: Init| {
            specs.push((name, shape, init));
            specs.len() - 1
        };
        let input_w = add("input.weight".into(), vec![cfg.input_features(), e], Init::FanIn(cfg.input_features()));
        let input_b = add("input.bias".into(), vec![e], Init::Zeros);
        let pos_symbol = add("position.symbol".into(), vec![cfg.num_symbols, e], Init::FanIn(e));
        let pos_subcarrier = add("position.subcarrier".into(), vec![cfg.fft_size, e], Init::FanIn(e));
        let mut blocks = Vec::with_capacity(cfg.num_blocks);
        for b in 0..cfg.num_blocks {
            let mut p = |part: &str, shape: Vec<usize>, init: Init| add(format!("block{b}.{part}"), shape, init);
            blocks.push(BlockSlots {
                ln1_gain: p("ln1.gain", vec![e], Init::Ones),
                ln1_bias: p("ln1.bias", vec![e], Init::Zeros),
                wq: p("attn.query.weight", vec![e, e], Init::FanIn(e)),
                bq: p("attn.query.bias", vec![e], Init::Zeros),
                wk: p("attn.key.weight", vec![e, e], Init::FanIn(e)),
                bk: p("attn.key.bias", vec![e], Init::Zeros),
                wv: p("attn.value.weight", vec![e, e], Init::FanIn(e)),
                bv: p("attn.value.bias", vec![e], Init::Zeros),
                wo: p("attn.output.weight", vec![e, e], Init::FanIn(e)),
                bo: p("attn.output.bias", vec![e], Init::Zeros),
                ln2_gain: p("ln2.gain", vec![e], Init::Ones),
                ln2_bias: p("ln2.bias", vec![e], Init::Zeros),
                ffn_w1: p("ffn.in.weight", vec![e, f], Init::FanIn(e)),
                ffn_b1: p("ffn.in.bias", vec![f], Init::Zeros),
                ffn_w2: p("ffn.out.weight", vec![f, e], Init::FanIn(f)),
                ffn_b2: p("ffn.out.bias", vec![e], Init::Zeros),
            });
        }
        let final_gain = add("final_ln.gain".into(), vec![e], Init::Ones);
        let final_bias = add("final_ln.bias".into(), vec![e], Init::Zeros);
        let output_w = add("output.weight".into(), vec![e, cfg.bits_per_symbol], Init::FanIn(e));
        let output_b = add("output.bias".into(), vec![cfg.bits_per_symbol], Init::Zeros);
        Self {
            specs,
            input_w,
            input_b,
            pos_symbol,
            pos_subcarrier,
            blocks,
            final_gain,
            final_bias,
            output_w,
            output_b,
        }
    }
}

/// Named model tensors in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub(crate) fn from_parts(names: Vec<String>, tensors: Vec<Tensor>) -> Self {
        Self { names, tensors }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Checks names and shapes against the layout implied by `cfg`.
    pub fn matches(&self, cfg: &NeuralReceiverConfig) -> bool {
        let layout = Layout::new(cfg);
        layout.specs.len() == self.tensors.len()
            && layout
                .specs
                .iter()
                .zip(self.names.iter().zip(&self.tensors))
                .all(|((name, shape, _), (n, t))| name == n && shape.as_slice() == t.shape())
    }
}

/// Fan-in uniform weights, zero biases, unit layer-norm gains.
pub fn build_model(cfg: &NeuralReceiverConfig, init_seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let mut rng = rng_from(split(init_seed, &[stream::INIT]));
    let mut names = Vec::with_capacity(layout.specs.len());
    let mut tensors = Vec::with_capacity(layout.specs.len());
    for (name, shape, init) in layout.specs {
        let n: usize = shape.iter().product();
        let data = match init {
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
        };
        names.push(name);
        tensors.push(Tensor::new(shape, data)?);
    }
    Ok(ModelParams { names, tensors })
}

/// `[tokens, 2·num_rx + 2]` input features in symbol-major token order.
pub fn input_features(rx: &ReceivedGrid, noise_var: f64, cfg: &NeuralReceiverConfig) -> Result<Tensor> {
    if rx.num_rx != cfg.num_rx || rx.num_symbols != cfg.num_symbols || rx.fft_size != cfg.fft_size {
        return Err(Error::Shape {
            op: "nr_forward",
            lhs: vec![cfg.num_rx, cfg.num_symbols, cfg.fft_size],
            rhs: vec![rx.num_rx, rx.num_symbols, rx.fft_size],
        });
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidNoise(noise_var));
    }
    let noise_feature = noise_var.max(MIN_NOISE_FEATURE).log10();
    let width = cfg.input_features();
    let mut data = Vec::with_capacity(cfg.num_tokens() * width);
    for t in 0..cfg.num_tokens() {
        for y in rx.re(t) {
            data.push(y.re);
            data.push(y.im);
        }
        data.push(noise_feature);
        data.push(if cfg.is_pilot(t) { 1.0 } else { 0.0 });
    }
    Tensor::new(vec![cfg.num_tokens(), width], data)
}

/// Binds every parameter as a leaf on `tape`.
pub(crate) fn bind(tape: &mut Tape, params: &ModelParams) -> Vec<Var> {
    params.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
}

/// Records the forward pass and returns the `[tokens, m]` logits.
pub(crate) fn forward_logits(tape: &mut Tape, cfg: &NeuralReceiverConfig, vars: &[Var], features: Var) -> Result<Var> {
    let layout = Layout::new(cfg);
    if vars.len() != layout.specs.len() {
        return Err(Error::Shape {
            op: "forward_logits",
            lhs: vec![layout.specs.len()],
            rhs: vec![vars.len()],
        });
    }
    let tokens = cfg.num_tokens();
    let symbol_idx: Vec<usize> = (0..tokens).map(|t| t / cfg.fft_size).collect();
    let subcarrier_idx: Vec<usize> = (0..tokens).map(|t| t % cfg.fft_size).collect();

    let mut x = linear(tape, features, vars[layout.input_w], vars[layout.input_b])?;
    let ps = tape.gather_rows(vars[layout.pos_symbol], &symbol_idx)?;
    let pf = tape.gather_rows(vars[layout.pos_subcarrier], &subcarrier_idx)?;
    let pos = tape.add(ps, pf)?;
    x = tape.add(x, pos)?;

    for b in &layout.blocks {
        let h = tape.layer_norm(x, vars[b.ln1_gain], vars[b.ln1_bias])?;
        let attn = AttentionParams {
            wq: vars[b.wq],
            bq: vars[b.bq],
            wk: vars[b.wk],
            bk: vars[b.bk],
            wv: vars[b.wv],
            bv: vars[b.bv],
            wo: vars[b.wo],
            bo: vars[b.bo],
            num_heads: cfg.num_heads,
        };
        let a = multi_head_attention(tape, h, &attn)?.output;
        x = tape.add(x, a)?;
        let h = tape.layer_norm(x, vars[b.ln2_gain], vars[b.ln2_bias])?;
        let h = linear(tape, h, vars[b.ffn_w1], vars[b.ffn_b1])?;
        let h = tape.relu(h);
        let h = linear(tape, h, vars[b.ffn_w2], vars[b.ffn_b2])?;
        x = tape.add(x, h)?;
    }
    let x = tape.layer_norm(x, vars[layout.final_gain], vars[layout.final_bias])?;
    linear(tape, x, vars[layout.output_w], vars[layout.output_b])
}

/// Indices of parameters whose gradient is identically zero (attention key
/// biases shift every score of a row by the same amount).
pub(crate) fn structurally_zero_grad(cfg: &NeuralReceiverConfig) -> Vec<usize> {
    Layout::new(cfg).blocks.iter().map(|b| b.bk).collect()
}

/// Runs the receiver on one grid and returns LLRs for the data REs.
pub fn nr_forward(
    rx: &ReceivedGrid,
    noise_var: f64,
    params: &ModelParams,
    cfg: &NeuralReceiverConfig,
) -> Result<LlrGrid> {
    cfg.validate()?;
    if !params.matches(cfg) {
        return Err(Error::CheckpointMismatch("parameters do not match the model config".into()));
    }
    let features = input_features(rx, noise_var, cfg)?;
    let mut tape = Tape::new();
    let vars = bind(&mut tape, params);
    let fv = tape.leaf(features);
    let logits = forward_logits(&mut tape, cfg, &vars, fv)?;
    let out = tape.value(logits);
    let mut values = Vec::with_capacity(out.len());
    for t in (0..cfg.num_tokens()).filter(|&t| !cfg.is_pilot(t)) {
        values.extend_from_slice(out.row(t));
    }
    Ok(LlrGrid {
        bits_per_symbol: cfg.bits_per_symbol,
        values,
    })
}

/// Labels and loss mask over all tokens for the data bits of one frame.
pub(crate) fn token_labels(bits: &[u8], cfg: &NeuralReceiverConfig) -> Result<(Tensor, Tensor)> {
    let m = cfg.bits_per_symbol;
    let tokens = cfg.num_tokens();
    let mut labels = vec![0.0; tokens * m];
    let mut mask = vec![0.0; tokens * m];
    let mut it = bits.chunks_exact(m);
    for t in (0..tokens).filter(|&t| !cfg.is_pilot(t)) {
        let chunk = it.next().ok_or_else(|| Error::Framing("too few bits for the data REs".into()))?;
        for (j, &b) in chunk.iter().enumerate() {
            labels[t * m + j] = f64::from(b);
            mask[t * m + j] = 1.0;
        }
    }
    if it.next().is_some() || !it.remainder().is_empty() {
        return Err(Error::Framing("bit count does not match the data REs".into()));
    }
    Ok((Tensor::new(vec![tokens, m], labels)?, Tensor::new(vec![tokens, m], mask)?))
}

/// Configuration of the end-to-end gradient check: a 2x4 grid, embedding 8.
pub fn tiny_config() -> NeuralReceiverConfig {
    NeuralReceiverConfig {
        num_blocks: 1,
        num_heads: 2,
        embed_dim: 8,
        ffn_dim: 8,
        bits_per_symbol: 2,
        num_rx: 2,
        num_symbols: 2,
        fft_size: 4,
        pilot_symbols: vec![0],
    }
}

/// Central-difference check of the full forward pass plus BCE, with
/// respect to every parameter and the input features.
pub fn end_to_end_gradcheck(seed: u64, corrupt: bool) -> Result<CheckResult> {
    let cfg = tiny_config();
    let mut params = build_model(&cfg, seed)?;
    let mut rng = rng_from(split(seed, &[stream::BITS]));
    // Move gains and biases off their initial values so every term is exercised.
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let features = Tensor::new(
        vec![cfg.num_tokens(), cfg.input_features()],
        (0..cfg.num_tokens() * cfg.input_features())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )?;
    let bits: Vec<u8> = (0..(cfg.num_tokens() - cfg.fft_size) * cfg.bits_per_symbol)
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let (labels, mask) = token_labels(&bits, &cfg)?;

    let fixed = structurally_zero_grad(&cfg);
    let free: Vec<usize> = (0..params.tensors().len()).filter(|i| !fixed.contains(i)).collect();
    let mut inputs: Vec<Tensor> = free.iter().map(|&i| params.tensors()[i].clone()).collect();
    inputs.push(features);

    let f = |tape: &mut Tape, vars: &[Var]| -> Result<Var> {
        let mut all = Vec::with_capacity(params.tensors().len());
        let mut next = 0;
        for (i, t) in params.tensors().iter().enumerate() {
            if fixed.contains(&i) {
                all.push(tape.leaf(t.clone()));
            } else {
                all.push(vars[next]);
                next += 1;
            }
        }
        let logits = forward_logits(tape, &cfg, &all, vars[next])?;
        let logits = if corrupt { tape.faulty_identity(logits, 1.01) } else { logits };
        tape.bce_with_logits(logits, &labels, Some(&mask))
    };
    let max_rel_error = grad_check(f, &inputs, GRADCHECK_STEP)?;
    Ok(CheckResult {
        name: "end_to_end_tiny_model".into(),
        max_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::link::random_frame;

    #[test]
    fn deterministic_init() {
        let cfg = tiny_config();
        assert_eq!(build_model(&cfg, 3).unwrap(), build_model(&cfg, 3).unwrap());
        assert_ne!(build_model(&cfg, 3).unwrap(), build_model(&cfg, 4).unwrap());
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let cfg = NeuralReceiverConfig::default();
        assert_eq!(cfg.input_features(), 6);
        let p = build_model(&cfg, 0).unwrap();
        assert_eq!(p.num_parameters(), 418_438);
        let mut names = p.names().to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), p.names().len());
    }

    #[test]
    fn init_ranges() {
        let p = build_model(&tiny_config(), 1).unwrap();
        assert!(p.get("block0.ln1.gain").unwrap().data().iter().all(|&v| v == 1.0));
        assert!(p.get("output.bias").unwrap().data().iter().all(|&v| v == 0.0));
        let bound = 1.0 / 8f64.sqrt();
        let w = p.get("block0.attn.query.weight").unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        assert!(w.data().iter().any(|v| v.abs() > bound / 2.0));
    }

    #[test]
    fn indivisible_heads_rejected() {
        let cfg = NeuralReceiverConfig {
            embed_dim: 100,
            num_heads: 8,
            ..NeuralReceiverConfig::default()
        };
        assert!(matches!(build_model(&cfg, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn output_shape_and_purity() {
        let frame = FrameConfig {
            num_symbols: 4,
            fft_size: 16,
            cp_len: 12,
            pilot_symbols: vec![1],
            bits_per_symbol: 6,
            ..FrameConfig::default()
        };
        let cfg = NeuralReceiverConfig {
            num_blocks: 1,
            num_heads: 2,
            embed_dim: 8,
            ffn_dim: 8,
            ..NeuralReceiverConfig::for_frame(&frame, 2)
        };
        let params = build_model(&cfg, 0).unwrap();
        let lf = random_frame(&frame, &ChannelConfig::default(), 0.1, 9).unwrap();
        let a = nr_forward(&lf.rx, 0.1, &params, &cfg).unwrap();
        assert_eq!(a.values.len(), 48 * 6);
        assert_eq!(a.num_res(), 48);
        assert_eq!(a, nr_forward(&lf.rx, 0.1, &params, &cfg).unwrap());

        let mut swapped = lf.rx.clone();
        let res = swapped.samples.len() / 2;
        swapped.samples.rotate_left(res);
        assert_ne!(a, nr_forward(&swapped, 0.1, &params, &cfg).unwrap());
    }

    #[test]
    fn default_frame_output_shape() {
        let frame = FrameConfig::default();
        let cfg = NeuralReceiverConfig {
            num_blocks: 1,
            num_heads: 1,
            embed_dim: 4,
            ffn_dim: 4,
            ..NeuralReceiverConfig::for_frame(&frame, 2)
        };
        let params = build_model(&cfg, 0).unwrap();
        let lf = random_frame(&frame, &ChannelConfig::default(), 0.1, 1).unwrap();
        let out = nr_forward(&lf.rx, 0.1, &params, &cfg).unwrap();
        assert_eq!((out.num_res(), out.bits_per_symbol), (1536, 6));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let cfg = tiny_config();
        let params = build_model(&cfg, 0).unwrap();
        let rx = ReceivedGrid {
            num_rx: 2,
            num_symbols: 2,
            fft_size: 8,
            samples: vec![Default::default(); 32],
            noise_var: 0.1,
        };
        assert!(matches!(nr_forward(&rx, 0.1, &params, &cfg), Err(Error::Shape { .. })));
    }

    #[test]
    fn end_to_end_gradients() {
        let r = end_to_end_gradcheck(0, false).unwrap();
        assert!(r.passed(), "{}", r.max_rel_error);
        assert!(!end_to_end_gradcheck(0, true).unwrap().passed());
    }
}
