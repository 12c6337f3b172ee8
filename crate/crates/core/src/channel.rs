//! SIMO Rayleigh tapped-delay-line channel with Jakes Doppler.
//!
//! Stands in for a geometric urban-macro model: a handful of exponentially
//! decaying taps (all within the cyclic prefix) give frequency selectivity,
//! and each tap evolves over the frame as a Gaussian-weighted
//! sum-of-sinusoids process whose autocorrelation is `J0(2π f_d τ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ofdm::FrameConfig;
use crate::rng::{rng_from, SimRng};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const NUM_SINUSOIDS: usize = 32;

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Maximum Doppler shift `v f_c / c` in Hz.
pub fn doppler_freq(speed_mps: f64, carrier_hz: f64) -> f64 {
    speed_mps * carrier_hz / SPEED_OF_LIGHT
}

/// Noise variance per complex RE for unit-energy symbols at the given
/// Eb/N0: `1 / (10^(ebno/10) R m)`.
pub fn ebno_to_noise_var(ebno_db: f64, bits_per_symbol: usize, code_rate: f64) -> f64 {
    1.0 / (10f64.powf(ebno_db / 10.0) * code_rate * bits_per_symbol as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerModel {
    #[default]
    Jakes,
    Static,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelProfile {
    /// `H ≡ 1` on every antenna.
    Awgn,
    /// Rayleigh taps at integer sample delays with linear powers summing to 1.
    Tdl { delays: Vec<usize>, powers: Vec<f64> },
}

impl ChannelProfile {
    pub const DEFAULT_DELAYS: [usize; 6] = [0, 1, 2, 3, 5, 8];
    /// Decay constant of the default exponential power-delay profile, in samples.
    pub const DEFAULT_DECAY: f64 = 3.0;

    pub fn exponential(delays: Vec<usize>, decay: f64) -> Self {
        let raw: Vec<f64> = delays.iter().map(|&d| (-(d as f64) / decay).exp()).collect();
        let total: f64 = raw.iter().sum();
        ChannelProfile::Tdl {
            delays,
            powers: raw.into_iter().map(|p| p / total).collect(),
        }
    }

    pub fn flat_rayleigh() -> Self {
        ChannelProfile::Tdl {
            delays: vec![0],
            powers: vec![1.0],
        }
    }
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self::exponential(Self::DEFAULT_DELAYS.to_vec(), Self::DEFAULT_DECAY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub num_rx: usize,
    pub carrier_freq: f64,
    pub speed_mps: f64,
    pub profile: ChannelProfile,
    pub doppler: DopplerModel,
    /// Freeze tap gains across the frame.
    pub block_fading: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            num_rx: 2,
            carrier_freq: 28e9,
            speed_mps: kmh_to_mps(90.0),
            profile: ChannelProfile::default(),
            doppler: DopplerModel::Jakes,
            block_fading: false,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, frame: &FrameConfig) -> Result<()> {
        if self.num_rx == 0 {
            return Err(Error::config("num_rx must be at least 1"));
        }
        if !(self.speed_mps >= 0.0) {
            return Err(Error::config(format!("speed {} must be non-negative", self.speed_mps)));
        }
        if let ChannelProfile::Tdl { delays, powers } = &self.profile {
            if delays.is_empty() || delays.len() != powers.len() {
                return Err(Error::config("tap delays and powers must be non-empty and equal length"));
            }
            if powers.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::config("tap powers must be non-negative"));
            }
            let total: f64 = powers.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("tap powers sum to {total}, expected 1")));
            }
            let max_delay = delays.iter().copied().max().unwrap_or(0);
            if max_delay >= frame.cp_len.max(1) {
                return Err(Error::config(format!(
                    "max tap delay {max_delay} must be below cp_len {}",
                    frame.cp_len
                )));
            }
        }
        Ok(())
    }

    pub fn max_doppler(&self) -> f64 {
        match self.doppler {
            DopplerModel::Jakes => doppler_freq(self.speed_mps, self.carrier_freq),
            DopplerModel::Static => 0.0,
        }
    }
}

/// Frequency response `[rx][symbol][subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub num_rx: usize,
    pub num_symbols: usize,
    pub fft_size: usize,
    pub h: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn constant(num_rx: usize, frame: &FrameConfig, value: Complex64) -> Self {
        Self {
            num_rx,
            num_symbols: frame.num_symbols,
            fft_size: frame.fft_size,
            h: vec![value; num_rx * frame.num_res()],
        }
    }

    pub fn at(&self, a: usize, s: usize, f: usize) -> Complex64 {
        self.h[(a * self.num_symbols + s) * self.fft_size + f]
    }

    /// Per-antenna response at flat RE index `re`.
    pub fn re(&self, re: usize) -> impl Iterator<Item = Complex64> + '_ {
        let stride = self.num_symbols * self.fft_size;
        (0..self.num_rx).map(move |a| self.h[a * stride + re])
    }
}

struct JakesTap {
    amplitude: Vec<Complex64>,
    doppler: Vec<f64>,
    phase: Vec<f64>,
    scale: f64,
}

impl JakesTap {
    fn draw(power: f64, fd: f64, rng: &mut SimRng) -> Self {
        let mut amplitude = Vec::with_capacity(NUM_SINUSOIDS);
        let mut doppler = Vec::with_capacity(NUM_SINUSOIDS);
        let mut phase = Vec::with_capacity(NUM_SINUSOIDS);
        for _ in 0..NUM_SINUSOIDS {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            amplitude.push(Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2);
            doppler.push(2.0 * PI * fd * rng.random_range(0.0..2.0 * PI).cos());
            phase.push(rng.random_range(0.0..2.0 * PI));
        }
        Self {
            amplitude,
            doppler,
            phase,
            scale: (power / NUM_SINUSOIDS as f64).sqrt(),
        }
    }

    fn at(&self, t: f64) -> Complex64 {
        let sum: Complex64 = self
            .amplitude
            .iter()
            .zip(&self.doppler)
            .zip(&self.phase)
            .map(|((a, w), p)| a * Complex64::from_polar(1.0, w * t + p))
            .sum();
        sum * self.scale
    }
}

/// Complex gain of every tap at every OFDM symbol, `[rx][tap][symbol]`.
/// Empty for the AWGN profile.
pub fn generate_tap_gains(cfg: &ChannelConfig, frame: &FrameConfig, seed: u64) -> Result<Vec<Vec<Vec<Complex64>>>> {
    cfg.validate(frame)?;
    let ChannelProfile::Tdl { powers, .. } = &cfg.profile else {
        return Ok(Vec::new());
    };
    let mut rng = rng_from(seed);
    let fd = cfg.max_doppler();
    let ts = frame.symbol_duration();
    Ok((0..cfg.num_rx)
        .map(|_| {
            powers
                .iter()
                .map(|&p| {
                    let tap = JakesTap::draw(p, fd, &mut rng);
                    let frozen = cfg.block_fading || fd == 0.0;
                    let g0 = tap.at(0.0);
                    (0..frame.num_symbols)
                        .map(|s| if frozen { g0 } else { tap.at(s as f64 * ts) })
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Draws one channel realization: independent antennas, per-tap Jakes
/// processes, frequency response as the DFT of the tap gains.
pub fn generate_channel(cfg: &ChannelConfig, frame: &FrameConfig, seed: u64) -> Result<ChannelRealization> {
    let delays = match &cfg.profile {
        ChannelProfile::Awgn => {
            cfg.validate(frame)?;
            return Ok(ChannelRealization::constant(cfg.num_rx, frame, Complex64::new(1.0, 0.0)));
        }
        ChannelProfile::Tdl { delays, .. } => delays,
    };
    let gains = generate_tap_gains(cfg, frame, seed)?;
    let n = frame.fft_size;
    let twiddle: Vec<Vec<Complex64>> = delays
        .iter()
        .map(|&d| {
            (0..n)
                .map(|f| Complex64::from_polar(1.0, -2.0 * PI * ((f * d) % n) as f64 / n as f64))
                .collect()
        })
        .collect();
    let mut h = Vec::with_capacity(cfg.num_rx * frame.num_res());
    for antenna in &gains {
        for s in 0..frame.num_symbols {
            for f in 0..n {
                h.push(antenna.iter().zip(&twiddle).map(|(g, w)| g[s] * w[f]).sum());
            }
        }
    }
    Ok(ChannelRealization {
        num_rx: cfg.num_rx,
        num_symbols: frame.num_symbols,
        fft_size: n,
        h,
    })
}
