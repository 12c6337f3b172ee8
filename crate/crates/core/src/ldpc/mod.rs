//! Rate-1/2 LDPC coding.
//!
//! [`ParityCheckMatrix`] holds the sparse structure, [`LdpcCode`] adds the
//! systematic encoder obtained by GF(2) elimination, and decoding is
//! normalised min-sum belief propagation.
//!
//! LLRs entering [`ldpc_decode`] follow the crate-wide convention
//! `log P(1)/P(0)`; the decoder negates them internally.

mod alist;
mod decoder;
mod encoder;
mod peg;

pub use alist::{load_parity_matrix, to_alist};
pub use decoder::{DecodeOutcome, DecoderConfig, MIN_SUM_SCALE};
pub use encoder::Systematic;
pub use peg::build_parity_matrix;

use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 20;

/// Sparse parity-check matrix stored as row and column adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from its row adjacency. Each row is sorted on entry;
    /// duplicate or out-of-range column indices are rejected.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() || rows.len() >= n {
            return Err(Error::config(format!(
                "need 0 < rows < n, got {} rows for n = {n}",
                rows.len()
            )));
        }
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::config(format!("row {r} repeats column {}", w[0])));
                }
            }
            for &c in row.iter() {
                if c >= n {
                    return Err(Error::config(format!("row {r} has column {c} >= n = {n}")));
                }
                cols[c].push(r);
            }
        }
        Ok(Self { n, rows, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity constraints.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Nominal message length `n - m`.
    pub fn k(&self) -> usize {
        self.n - self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    pub fn column_degrees(&self) -> Vec<usize> {
        self.cols.iter().map(Vec::len).collect()
    }

    pub fn num_edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `H * word^T` over GF(2), one entry per row.
    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ (word[c] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n && self.syndrome(word).iter().all(|&s| s == 0)
    }

    /// Length of the shortest cycle in the Tanner graph, if any cycle exists.
    pub fn girth(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        // BFS from every variable node over the bipartite graph; node ids are
        // variables 0..n then checks n..n+m.
        let total = self.n + self.m();
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        let mut queue = std::collections::VecDeque::new();
        for start in 0..self.n {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[start] = 0;
            queue.clear();
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                if let Some(b) = best {
                    if 2 * dist[u] >= b {
                        break;
                    }
                }
                let neighbours: Box<dyn Iterator<Item = usize>> = if u < self.n {
                    Box::new(self.cols[u].iter().map(|&r| self.n + r))
                } else {
                    Box::new(self.rows[u - self.n].iter().copied())
                };
                for v in neighbours {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    } else if parent[u] != v {
                        let len = dist[u] + dist[v] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }
}

/// A parity-check matrix together with its systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: ParityCheckMatrix,
    systematic: Systematic,
}

impl LdpcCode {
    /// Runs GF(2) elimination on `h`. Rank-deficient matrices are rejected.
    pub fn new(h: ParityCheckMatrix) -> Result<Self> {
        let systematic = Systematic::from_matrix(&h)?;
        Ok(Self { h, systematic })
    }

    /// Regular (3,6) code of length `n` from the seeded PEG construction.
    pub fn regular(n: usize, seed: u64) -> Result<Self> {
        Self::new(build_parity_matrix(n, seed)?)
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    pub fn systematic(&self) -> &Systematic {
        &self.systematic
    }

    pub fn n(&self) -> usize {
        self.h.n()
    }

    pub fn k(&self) -> usize {
        self.h.k()
    }

    pub fn encode(&self, msg: &[u8]) -> Result<Vec<u8>> {
        self.systematic.encode(msg)
    }

    pub fn decode(&self, llrs: &[f64], max_iter: usize) -> Result<DecodeOutcome> {
        DecoderConfig {
            max_iter,
            ..DecoderConfig::default()
        }
        .decode(self, llrs)
    }
}

/// Systematic encoding of a `k`-bit message into an `n`-bit codeword.
pub fn ldpc_encode(msg: &[u8], code: &LdpcCode) -> Result<Vec<u8>> {
    code.encode(msg)
}

/// Normalised min-sum decoding of `log P(1)/P(0)` LLRs.
pub fn ldpc_decode(llrs: &[f64], code: &LdpcCode, max_iter: usize) -> Result<DecodeOutcome> {
    code.decode(llrs, max_iter)
}

pub(crate) fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(Error::InvalidInput(format!(
            "bit {i} has value {}, expected 0 or 1",
            bits[i]
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// (7,4) Hamming code in the usual column-binary-index form.
    pub(crate) fn hamming74() -> ParityCheckMatrix {
        ParityCheckMatrix::from_rows(
            7,
            vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(ParityCheckMatrix::from_rows(4, vec![vec![0, 0]]).is_err());
        assert!(ParityCheckMatrix::from_rows(4, vec![vec![0, 4]]).is_err());
        assert!(ParityCheckMatrix::from_rows(2, vec![vec![0], vec![1]]).is_err());
    }

    #[test]
    fn hamming_dimensions_and_girth() {
        let h = hamming74();
        assert_eq!((h.n(), h.m(), h.k()), (7, 3, 4));
        assert_eq!(h.column_degrees(), vec![1, 1, 2, 1, 2, 2, 3]);
        assert_eq!(h.girth(), Some(4));
        assert!(h.is_codeword(&[0; 7]));
    }
}
