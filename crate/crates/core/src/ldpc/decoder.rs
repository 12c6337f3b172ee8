//! Normalised min-sum belief propagation (flooding schedule).

use super::LdpcCode;
use crate::{Error, Result};

/// Scaling applied to every check-to-variable message.
pub const MIN_SUM_SCALE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    /// Message bits read from the information set of the final hard decision.
    pub message: Vec<u8>,
    /// Full hard-decision word after the last iteration.
    pub codeword: Vec<u8>,
    /// True iff the syndrome is zero and no posterior is exactly zero.
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub max_iter: usize,
    pub scale: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            max_iter: super::DEFAULT_MAX_ITER,
            scale: MIN_SUM_SCALE,
        }
    }
}

impl DecoderConfig {
    /// `llrs` are `log P(1)/P(0)`. Internally the decoder works on
    /// `log P(0)/P(1)`, so a negative posterior decides a one bit and an
    /// exactly zero posterior decides zero.
    pub fn decode(&self, code: &LdpcCode, llrs: &[f64]) -> Result<DecodeOutcome> {
        let h = code.matrix();
        let n = h.n();
        if llrs.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} LLRs, got {}",
                llrs.len()
            )));
        }
        if let Some(i) = llrs.iter().position(|l| !l.is_finite()) {
            return Err(Error::InvalidInput(format!("LLR {i} is not finite ({})", llrs[i])));
        }

        let channel: Vec<f64> = llrs.iter().map(|l| -l).collect();
        let rows = h.rows();
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut edge_var = Vec::with_capacity(h.num_edges());
        offsets.push(0);
        for row in rows {
            edge_var.extend_from_slice(row);
            offsets.push(edge_var.len());
        }

        let mut v2c: Vec<f64> = edge_var.iter().map(|&v| channel[v]).collect();
        let mut c2v = vec![0.0; edge_var.len()];
        let mut total = vec![0.0; n];
        let mut hard = vec![0u8; n];
        let mut iterations = 0;
        let mut converged = false;

        for _ in 0..self.max_iter.max(1) {
            iterations += 1;
            for c in 0..rows.len() {
                let edges = offsets[c]..offsets[c + 1];
                let mut min1 = f64::INFINITY;
                let mut min2 = f64::INFINITY;
                let mut min_at = usize::MAX;
                let mut negative = false;
                for e in edges.clone() {
                    let msg = v2c[e];
                    negative ^= msg < 0.0;
                    let mag = msg.abs();
                    if mag < min1 {
                        min2 = min1;
                        min1 = mag;
                        min_at = e;
                    } else if mag < min2 {
                        min2 = mag;
                    }
                }
                for e in edges {
                    let mag = if e == min_at { min2 } else { min1 };
                    let neg = negative ^ (v2c[e] < 0.0);
                    let out = self.scale * mag;
                    c2v[e] = if neg { -out } else { out };
                }
            }

            total.copy_from_slice(&channel);
            for (e, &v) in edge_var.iter().enumerate() {
                total[v] += c2v[e];
            }
            let mut tie = false;
            for (b, &t) in hard.iter_mut().zip(&total) {
                tie |= t == 0.0;
                *b = u8::from(t < 0.0);
            }
            let satisfied = (0..rows.len()).all(|c| {
                edge_var[offsets[c]..offsets[c + 1]]
                    .iter()
                    .fold(0u8, |acc, &v| acc ^ hard[v])
                    == 0
            });
            if satisfied && !tie {
                converged = true;
                break;
            }
            for (e, &v) in edge_var.iter().enumerate() {
                v2c[e] = total[v] - c2v[e];
            }
        }

        Ok(DecodeOutcome {
            message: code.systematic().extract(&hard),
            codeword: hard,
            converged,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::tests::hamming74;
    use crate::ldpc::DEFAULT_MAX_ITER;
    use rand::Rng;

    fn bipolar(cw: &[u8], a: f64) -> Vec<f64> {
        cw.iter().map(|&b| if b == 1 { a } else { -a }).collect()
    }

    #[test]
    fn strong_zero_beliefs_converge_in_one_iteration() {
        let code = LdpcCode::regular(1024, 7).unwrap();
        let out = code.decode(&vec![-20.0; 1024], DEFAULT_MAX_ITER).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(out.message.iter().all(|&b| b == 0));
    }

    #[test]
    fn all_zero_llrs_do_not_converge() {
        let code = LdpcCode::regular(96, 1).unwrap();
        let out = code.decode(&vec![0.0; 96], 7).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 7);
        assert!(out.message.iter().all(|&b| b == 0));
    }

    // The weight-3 column sits in every check of this H, so min-sum pushes
    // its three degree-2 neighbours over instead: a valid but wrong
    // codeword. Every other single error is corrected.
    #[test]
    fn hamming_single_flip_behaviour() {
        let code = LdpcCode::new(hamming74()).unwrap();
        for v in 0u8..16 {
            let msg: Vec<u8> = (0..4).map(|i| (v >> (3 - i)) & 1).collect();
            let cw = code.encode(&msg).unwrap();
            for flip in 0..7 {
                let mut llr = bipolar(&cw, 20.0);
                llr[flip] = -llr[flip];
                let out = code.decode(&llr, DEFAULT_MAX_ITER).unwrap();
                assert!(out.converged, "msg {msg:?} flip {flip}");
                assert!(code.matrix().is_codeword(&out.codeword));
                assert_eq!(out.message == msg, flip != 6, "msg {msg:?} flip {flip}");
            }
        }
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        let code = LdpcCode::new(hamming74()).unwrap();
        let mut llr = vec![1.0; 7];
        llr[3] = f64::NAN;
        assert!(matches!(code.decode(&llr, 5), Err(Error::InvalidInput(_))));
        assert!(code.decode(&[1.0; 6], 5).is_err());
    }

    #[test]
    fn roundtrip_with_strong_matching_llrs() {
        let code = LdpcCode::regular(1024, 7).unwrap();
        let mut rng = crate::rng::rng_from(42);
        for _ in 0..1000 {
            let msg: Vec<u8> = (0..512).map(|_| rng.random_range(0..2u8)).collect();
            let cw = code.encode(&msg).unwrap();
            let a = rng.random_range(10.0..30.0);
            let out = code.decode(&bipolar(&cw, a), DEFAULT_MAX_ITER).unwrap();
            assert!(out.converged);
            assert_eq!(out.message, msg);
        }
    }

    #[test]
    fn decoding_is_deterministic() {
        let code = LdpcCode::regular(192, 5).unwrap();
        let mut rng = crate::rng::rng_from(9);
        let llr: Vec<f64> = (0..192).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert_eq!(code.decode(&llr, 20).unwrap(), code.decode(&llr, 20).unwrap());
    }
}
