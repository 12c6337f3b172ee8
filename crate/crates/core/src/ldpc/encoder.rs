//! Systematic encoding by Gaussian elimination over GF(2).
//!
//! H is reduced to row echelon form; the pivot columns carry parity and the
//! remaining `k` columns form the information set. For every row of the
//! reduced matrix the parity bit at its pivot column is the XOR of the
//! message bits it touches.

use super::{check_bits, ParityCheckMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Systematic {
    n: usize,
    info_positions: Vec<usize>,
    pivot_columns: Vec<usize>,
    // One packed row of k bits per parity bit.
    parity_rows: Vec<Vec<u64>>,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl Systematic {
    pub fn from_matrix(h: &ParityCheckMatrix) -> Result<Self> {
        let n = h.n();
        let m = h.m();
        let w = words(n);
        let mut dense: Vec<Vec<u64>> = h
            .rows()
            .iter()
            .map(|row| {
                let mut r = vec![0u64; w];
                for &c in row {
                    r[c / 64] |= 1 << (c % 64);
                }
                r
            })
            .collect();

        let mut pivot_columns = Vec::with_capacity(m);
        let mut rank = 0;
        for col in 0..n {
            if rank == m {
                break;
            }
            let (word, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..m).find(|&r| dense[r][word] & bit != 0) else {
                continue;
            };
            dense.swap(rank, p);
            let pivot = dense[rank].clone();
            for (r, row) in dense.iter_mut().enumerate() {
                if r != rank && row[word] & bit != 0 {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivot_columns.push(col);
            rank += 1;
        }
        if rank < m {
            return Err(Error::RankDeficient { rank, rows: m });
        }

        let mut is_pivot = vec![false; n];
        pivot_columns.iter().for_each(|&c| is_pivot[c] = true);
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_positions.len();
        let parity_rows = dense
            .iter()
            .map(|row| {
                let mut packed = vec![0u64; words(k)];
                for (i, &c) in info_positions.iter().enumerate() {
                    if row[c / 64] >> (c % 64) & 1 == 1 {
                        packed[i / 64] |= 1 << (i % 64);
                    }
                }
                packed
            })
            .collect();

        Ok(Self {
            n,
            info_positions,
            pivot_columns,
            parity_rows,
        })
    }

    /// Codeword positions that carry the message, in message order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.pivot_columns
    }

    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        let k = self.info_positions.len();
        if msg.len() != k {
            return Err(Error::InvalidInput(format!(
                "message has {} bits, code expects {k}",
                msg.len()
            )));
        }
        check_bits(msg)?;
        let mut packed = vec![0u64; words(k)];
        for (i, &b) in msg.iter().enumerate() {
            packed[i / 64] |= (b as u64) << (i % 64);
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(msg) {
            cw[pos] = b;
        }
        for (row, &pos) in self.parity_rows.iter().zip(&self.pivot_columns) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Message bits read back from a codeword (or any hard decision).
    pub fn extract(&self, word: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| word[p]).collect()
    }
}
