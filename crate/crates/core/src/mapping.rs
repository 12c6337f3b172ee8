//! Gray-mapped QAM and soft demapping.
//!
//! Labels follow the 3GPP TS 38.211 construction: bit `b0` is the most
//! significant bit of the label and selects the sign of the in-phase
//! component, `b1` the sign of the quadrature component, and the
//! remaining bits refine amplitude alternately in I and Q.

use num_complex::Complex64;

use crate::{Error, Result};

/// LLRs are clamped to `[-LLR_CLAMP, LLR_CLAMP]`.
pub const LLR_CLAMP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DemapMode {
    #[default]
    Exact,
    MaxLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits: usize,
    points: Vec<Complex64>,
    // labels_with_bit[i][v] lists labels whose bit i equals v.
    labels_with_bit: Vec<[Vec<usize>; 2]>,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        let bits = match order {
            4 => 2,
            16 => 4,
            64 => 6,
            _ => return Err(Error::config(format!("unsupported QAM order {order}"))),
        };
        let points = (0..order).map(|label| gray_point(label, bits)).collect();
        let labels_with_bit = (0..bits)
            .map(|i| {
                let shift = bits - 1 - i;
                let ones = (0..order).filter(|l| l >> shift & 1 == 1).collect();
                let zeros = (0..order).filter(|l| l >> shift & 1 == 0).collect();
                [zeros, ones]
            })
            .collect();
        Ok(Self {
            order,
            bits,
            points,
            labels_with_bit,
        })
    }

    /// Constellation for `bits_per_symbol` in {2, 4, 6}.
    pub fn with_bits(bits_per_symbol: usize) -> Result<Self> {
        Self::new(1usize.checked_shl(bits_per_symbol as u32).unwrap_or(0))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    /// Points indexed by label, `b0` as most significant bit.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn label_bits(&self, label: usize) -> Vec<u8> {
        (0..self.bits)
            .map(|i| (label >> (self.bits - 1 - i) & 1) as u8)
            .collect()
    }

    /// Writes the `m` LLRs of `x` into `out`.
    pub fn demap_into(&self, x: Complex64, noise_var: f64, mode: DemapMode, out: &mut [f64]) -> Result<()> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidNoise(noise_var));
        }
        let mut metric = [0.0f64; 64];
        for (m, p) in metric.iter_mut().zip(&self.points) {
            *m = -(x - p).norm_sqr() / noise_var;
        }
        for (i, llr) in out.iter_mut().enumerate().take(self.bits) {
            let [zeros, ones] = &self.labels_with_bit[i];
            let value = match mode {
                DemapMode::Exact => log_sum_exp(ones, &metric) - log_sum_exp(zeros, &metric),
                DemapMode::MaxLog => max_of(ones, &metric) - max_of(zeros, &metric),
            };
            *llr = if value.is_nan() { 0.0 } else { value.clamp(-LLR_CLAMP, LLR_CLAMP) };
        }
        Ok(())
    }
}

fn max_of(labels: &[usize], metric: &[f64]) -> f64 {
    labels.iter().map(|&l| metric[l]).fold(f64::NEG_INFINITY, f64::max)
}

fn log_sum_exp(labels: &[usize], metric: &[f64]) -> f64 {
    let peak = max_of(labels, metric);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + labels.iter().map(|&l| (metric[l] - peak).exp()).sum::<f64>().ln()
}

fn gray_point(label: usize, bits: usize) -> Complex64 {
    let b = |i: usize| 1.0 - 2.0 * (label >> (bits - 1 - i) & 1) as f64;
    match bits {
        2 => Complex64::new(b(0), b(1)) / 2f64.sqrt(),
        4 => Complex64::new(b(0) * (2.0 - b(2)), b(1) * (2.0 - b(3))) / 10f64.sqrt(),
        6 => Complex64::new(
            b(0) * (4.0 - b(2) * (2.0 - b(4))),
            b(1) * (4.0 - b(3) * (2.0 - b(5))),
        ) / 42f64.sqrt(),
        _ => unreachable!("validated in Constellation::new"),
    }
}

/// Maps groups of `m` bits (first bit most significant) to symbols.
pub fn qam_map(bits: &[u8], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let m = constellation.bits_per_symbol();
    if bits.len() % m != 0 {
        return Err(Error::Framing(format!(
            "{} bits is not a multiple of {m} bits per symbol",
            bits.len()
        )));
    }
    crate::ldpc::check_bits(bits)?;
    Ok(bits
        .chunks_exact(m)
        .map(|chunk| {
            let label = chunk.iter().fold(0usize, |acc, &b| acc << 1 | b as usize);
            constellation.points[label]
        })
        .collect())
}

/// LLRs `log P(b=1)/P(b=0)` of one equalised symbol with effective noise
/// variance `noise_var`, clamped to ±[`LLR_CLAMP`].
pub fn qam_demap_llr(
    x: Complex64,
    noise_var: f64,
    constellation: &Constellation,
    mode: DemapMode,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; constellation.bits_per_symbol()];
    constellation.demap_into(x, noise_var, mode, &mut out)?;
    Ok(out)
}

/// Per-bit LLRs of the data REs of a frame, `[data RE][bit]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrGrid {
    pub bits_per_symbol: usize,
    pub values: Vec<f64>,
}

impl LlrGrid {
    pub fn num_res(&self) -> usize {
        self.values.len() / self.bits_per_symbol.max(1)
    }

    pub fn hard_bits(&self) -> Vec<u8> {
        hard_decision(&self.values)
    }
}

/// One bit per LLR: 1 iff the LLR is strictly positive.
pub fn hard_decision(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| u8::from(l > 0.0)).collect()
}
