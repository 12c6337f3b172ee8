use crate::{Error, Result};

use super::{Tape, Var};

/// `x · w + b` with `w` of shape `[in, out]` and `b` of length `out`.
pub fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    tape.add_row(xw, b)
}

/// Attention projections bound to a tape. The query, key and value weights
/// are `[embed, embed]`; head `h` uses columns `h*d_k..(h+1)*d_k`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub wv: Var,
    pub bv: Var,
    pub wo: Var,
    pub bo: Var,
    pub num_heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub output: Var,
    /// One `[tokens, tokens]` weight matrix per head.
    pub weights: Vec<Var>,
}

/// `softmax(q kᵀ / √d_k)` where `d_k` is the column count of `q`.
pub fn attention_weights(tape: &mut Tape, q: Var, k: Var) -> Result<Var> {
    let dk = tape.value(q).cols();
    let scores = tape.matmul_nt(q, k)?;
    let scaled = tape.scale(scores, 1.0 / (dk as f64).sqrt());
    Ok(tape.softmax(scaled))
}

/// Multi-head self-attention over the rows of `x` (`[tokens, embed]`).
pub fn multi_head_attention(tape: &mut Tape, x: Var, p: &AttentionParams) -> Result<AttentionOutput> {
    let embed = tape.value(x).cols();
    if p.num_heads == 0 || embed % p.num_heads != 0 {
        return Err(Error::InvalidConfig(format!(
            "embed_dim {embed} is not divisible by num_heads {}",
            p.num_heads
        )));
    }
    let dk = embed / p.num_heads;
    let q = linear(tape, x, p.wq, p.bq)?;
    let k = linear(tape, x, p.wk, p.bk)?;
    let v = linear(tape, x, p.wv, p.bv)?;

    let mut heads = Vec::with_capacity(p.num_heads);
    let mut weights = Vec::with_capacity(p.num_heads);
    for h in 0..p.num_heads {
        let (qh, kh, vh) = if p.num_heads == 1 {
            (q, k, v)
        } else {
            (
                tape.slice_cols(q, h * dk, dk)?,
                tape.slice_cols(k, h * dk, dk)?,
                tape.slice_cols(v, h * dk, dk)?,
            )
        };
        let a = attention_weights(tape, qh, kh)?;
        heads.push(tape.matmul(a, vh)?);
        weights.push(a);
    }
    let merged = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
    let output = linear(tape, merged, p.wo, p.bo)?;
    Ok(AttentionOutput { output, weights })
}
