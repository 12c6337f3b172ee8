//! Resource grid, OFDM (de)modulation and the per-RE channel model.
//!
//! Grids are stored row-major: OFDM symbol index first, subcarrier second.
//! Received grids add a leading receive-antenna axis. Pilots occupy whole
//! OFDM symbols, so the pilot pattern is separable in time and frequency.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::channel::ChannelRealization;
use crate::mapping::Constellation;
use crate::rng::rng_from;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub num_symbols: usize,
    pub fft_size: usize,
    pub subcarrier_spacing: f64,
    pub cp_len: usize,
    pub pilot_symbols: Vec<usize>,
    pub bits_per_symbol: usize,
    /// 1.0 means uncoded.
    pub code_rate: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            num_symbols: 14,
            fft_size: 128,
            subcarrier_spacing: 240e3,
            cp_len: 16,
            pilot_symbols: vec![2, 11],
            bits_per_symbol: 6,
            code_rate: 0.5,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_symbols == 0 || self.fft_size == 0 {
            return Err(Error::config("grid must have at least one symbol and subcarrier"));
        }
        if self.cp_len >= self.fft_size {
            return Err(Error::config(format!(
                "cp_len {} must be below fft_size {}",
                self.cp_len, self.fft_size
            )));
        }
        if let Some(&p) = self.pilot_symbols.iter().find(|&&p| p >= self.num_symbols) {
            return Err(Error::config(format!("pilot symbol {p} outside 0..{}", self.num_symbols)));
        }
        let mut sorted = self.pilot_symbols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.pilot_symbols.len() {
            return Err(Error::config("duplicate pilot symbol index"));
        }
        if sorted.len() >= self.num_symbols {
            return Err(Error::config("frame has no data symbols"));
        }
        if !matches!(self.bits_per_symbol, 2 | 4 | 6) {
            return Err(Error::config(format!(
                "bits_per_symbol must be 2, 4 or 6, got {}",
                self.bits_per_symbol
            )));
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return Err(Error::config(format!("code rate {} outside (0, 1]", self.code_rate)));
        }
        if !(self.subcarrier_spacing > 0.0) {
            return Err(Error::config("subcarrier spacing must be positive"));
        }
        Ok(())
    }

    pub fn num_res(&self) -> usize {
        self.num_symbols * self.fft_size
    }

    pub fn is_pilot_symbol(&self, s: usize) -> bool {
        self.pilot_symbols.contains(&s)
    }

    pub fn num_data_res(&self) -> usize {
        (self.num_symbols - self.pilot_symbols.len()) * self.fft_size
    }

    /// Coded bits carried by the data REs of one frame.
    pub fn data_bits(&self) -> usize {
        self.num_data_res() * self.bits_per_symbol
    }

    /// OFDM symbol duration including the cyclic prefix, in seconds.
    pub fn symbol_duration(&self) -> f64 {
        (self.fft_size + self.cp_len) as f64 / (self.fft_size as f64 * self.subcarrier_spacing)
    }

    pub fn pilot_mask(&self) -> Vec<bool> {
        (0..self.num_symbols)
            .flat_map(|s| std::iter::repeat_n(self.is_pilot_symbol(s), self.fft_size))
            .collect()
    }

    /// Flat indices of the data REs, symbol-major.
    pub fn data_indices(&self) -> Vec<usize> {
        (0..self.num_res())
            .filter(|&i| !self.is_pilot_symbol(i / self.fft_size))
            .collect()
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::with_bits(self.bits_per_symbol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub num_symbols: usize,
    pub fft_size: usize,
    pub symbols: Vec<Complex64>,
    pub pilot_mask: Vec<bool>,
    /// Pilot symbols in flat-index order of the pilot REs.
    pub pilot_values: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn at(&self, s: usize, f: usize) -> Complex64 {
        self.symbols[s * self.fft_size + f]
    }

    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(Complex64::norm_sqr).sum()
    }
}

/// Received frequency-domain samples, `[rx][symbol][subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedGrid {
    pub num_rx: usize,
    pub num_symbols: usize,
    pub fft_size: usize,
    pub samples: Vec<Complex64>,
    pub noise_var: f64,
}

impl ReceivedGrid {
    pub fn at(&self, a: usize, s: usize, f: usize) -> Complex64 {
        self.samples[(a * self.num_symbols + s) * self.fft_size + f]
    }

    /// Antenna samples of one RE (flat index `re`).
    pub fn re(&self, re: usize) -> impl Iterator<Item = Complex64> + '_ {
        let stride = self.num_symbols * self.fft_size;
        (0..self.num_rx).map(move |a| self.samples[a * stride + re])
    }
}

/// QPSK pilot symbols for every RE of the pilot OFDM symbols, drawn from
/// `pilot_seed`. Transmitter and receiver regenerate the same values.
pub fn pilot_sequence(cfg: &FrameConfig, pilot_seed: u64) -> Vec<Complex64> {
    let qpsk = Constellation::new(4).expect("QPSK is always available");
    let mut rng = rng_from(pilot_seed);
    (0..cfg.pilot_symbols.len() * cfg.fft_size)
        .map(|_| qpsk.points()[rng.random_range(0..4)])
        .collect()
}

pub fn build_grid(data: &[Complex64], cfg: &FrameConfig, pilot_seed: u64) -> Result<ResourceGrid> {
    cfg.validate()?;
    let expected = cfg.num_data_res();
    if data.len() != expected {
        return Err(Error::Capacity {
            expected,
            actual: data.len(),
        });
    }
    let pilot_values = pilot_sequence(cfg, pilot_seed);
    let pilot_mask = cfg.pilot_mask();
    let mut data_it = data.iter();
    let mut pilot_it = pilot_values.iter();
    let symbols = pilot_mask
        .iter()
        .map(|&is_pilot| {
            let it = if is_pilot { &mut pilot_it } else { &mut data_it };
            *it.next().expect("counts checked above")
        })
        .collect();
    Ok(ResourceGrid {
        num_symbols: cfg.num_symbols,
        fft_size: cfg.fft_size,
        symbols,
        pilot_mask,
        pilot_values,
    })
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Unitary IDFT per OFDM symbol followed by cyclic-prefix insertion.
pub fn ofdm_modulate(grid: &ResourceGrid, cfg: &FrameConfig) -> Result<Vec<Complex64>> {
    if grid.num_symbols != cfg.num_symbols || grid.fft_size != cfg.fft_size {
        return Err(Error::Shape {
            op: "ofdm_modulate",
            lhs: vec![grid.num_symbols, grid.fft_size],
            rhs: vec![cfg.num_symbols, cfg.fft_size],
        });
    }
    let n = cfg.fft_size;
    let ifft = plan(n, true);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(cfg.num_symbols * (n + cfg.cp_len));
    let mut buf = vec![Complex64::default(); n];
    for row in grid.symbols.chunks_exact(n) {
        buf.copy_from_slice(row);
        ifft.process(&mut buf);
        buf.iter_mut().for_each(|x| *x *= scale);
        out.extend_from_slice(&buf[n - cfg.cp_len..]);
        out.extend_from_slice(&buf);
    }
    Ok(out)
}

/// Cyclic-prefix removal followed by a unitary DFT per OFDM symbol.
/// Returns the flat `[symbol][subcarrier]` grid.
pub fn ofdm_demodulate(samples: &[Complex64], cfg: &FrameConfig) -> Result<Vec<Complex64>> {
    let n = cfg.fft_size;
    let block = n + cfg.cp_len;
    if samples.len() % block != 0 {
        return Err(Error::Framing(format!(
            "{} samples is not a multiple of the {block}-sample OFDM symbol",
            samples.len()
        )));
    }
    let fft = plan(n, false);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(samples.len() / block * n);
    for chunk in samples.chunks_exact(block) {
        let mut buf = chunk[cfg.cp_len..].to_vec();
        fft.process(&mut buf);
        out.extend(buf.into_iter().map(|x| x * scale));
    }
    Ok(out)
}

/// `y[a,s,f] = H[a,s,f] x[s,f] + n` with `n ~ CN(0, noise_var)`.
pub fn apply_channel_freq(
    grid: &ResourceGrid,
    chan: &ChannelRealization,
    noise_var: f64,
    noise_seed: u64,
) -> Result<ReceivedGrid> {
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidNoise(noise_var));
    }
    if chan.num_symbols != grid.num_symbols || chan.fft_size != grid.fft_size {
        return Err(Error::Shape {
            op: "apply_channel_freq",
            lhs: vec![grid.num_symbols, grid.fft_size],
            rhs: vec![chan.num_symbols, chan.fft_size],
        });
    }
    let mut rng = rng_from(noise_seed);
    let sd = (noise_var / 2.0).sqrt();
    let res = grid.symbols.len();
    let mut samples = Vec::with_capacity(chan.num_rx * res);
    for a in 0..chan.num_rx {
        let h = &chan.h[a * res..(a + 1) * res];
        for (&hx, &x) in h.iter().zip(&grid.symbols) {
            let mut y = hx * x;
            if noise_var > 0.0 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                y += Complex64::new(re, im) * sd;
            }
            samples.push(y);
        }
    }
    Ok(ReceivedGrid {
        num_rx: chan.num_rx,
        num_symbols: grid.num_symbols,
        fft_size: grid.fft_size,
        samples,
        noise_var,
    })
}
