//! Conventional receiver: LS pilot estimates, linear interpolation across
//! OFDM symbols, per-RE MMSE combining over the receive antennas and exact
//! soft demapping.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::mapping::{DemapMode, LlrGrid};
use crate::ofdm::{pilot_sequence, FrameConfig, ReceivedGrid};
use crate::{Error, Result};

/// Below this `|h|^2` an RE is treated as erased.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;
/// Lower bound on the effective noise variance handed to the demapper, so
/// that a noiseless link still yields (clamped) finite LLRs.
pub const MIN_EFFECTIVE_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub num_rx: usize,
    pub num_symbols: usize,
    pub fft_size: usize,
    /// `[rx][symbol][subcarrier]`; zero where nothing has been estimated.
    pub h: Vec<Complex64>,
    /// Per RE: estimated directly from a pilot.
    pub from_pilot: Vec<bool>,
}

impl ChannelEstimate {
    pub fn at(&self, a: usize, s: usize, f: usize) -> Complex64 {
        self.h[(a * self.num_symbols + s) * self.fft_size + f]
    }

    pub fn re(&self, re: usize) -> impl Iterator<Item = Complex64> + '_ {
        let stride = self.num_symbols * self.fft_size;
        (0..self.num_rx).map(move |a| self.h[a * stride + re])
    }

    /// Uses the true channel as the estimate.
    pub fn perfect(chan: &ChannelRealization) -> Self {
        Self {
            num_rx: chan.num_rx,
            num_symbols: chan.num_symbols,
            fft_size: chan.fft_size,
            h: chan.h.clone(),
            from_pilot: vec![true; chan.num_symbols * chan.fft_size],
        }
    }
}

/// `Ĥ = y / x_p` on every pilot RE and antenna.
pub fn ls_estimate(rx: &ReceivedGrid, cfg: &FrameConfig, pilots: &[Complex64]) -> Result<ChannelEstimate> {
    if rx.num_symbols != cfg.num_symbols || rx.fft_size != cfg.fft_size {
        return Err(Error::Shape {
            op: "ls_estimate",
            lhs: vec![rx.num_symbols, rx.fft_size],
            rhs: vec![cfg.num_symbols, cfg.fft_size],
        });
    }
    if pilots.len() != cfg.pilot_symbols.len() * cfg.fft_size {
        return Err(Error::InvalidInput(format!(
            "{} pilot values for {} pilot REs",
            pilots.len(),
            cfg.pilot_symbols.len() * cfg.fft_size
        )));
    }
    let n = cfg.fft_size;
    let mut h = vec![Complex64::default(); rx.samples.len()];
    let from_pilot = cfg.pilot_mask();
    let mut pilot_symbols: Vec<usize> = cfg.pilot_symbols.clone();
    pilot_symbols.sort_unstable();
    for (p_idx, &s) in pilot_symbols.iter().enumerate() {
        for f in 0..n {
            let xp = pilots[p_idx * n + f];
            if xp.norm_sqr() == 0.0 {
                return Err(Error::ZeroPilot { symbol: s, subcarrier: f });
            }
            for a in 0..rx.num_rx {
                let i = (a * cfg.num_symbols + s) * n + f;
                h[i] = rx.samples[i] / xp;
            }
        }
    }
    Ok(ChannelEstimate {
        num_rx: rx.num_rx,
        num_symbols: cfg.num_symbols,
        fft_size: n,
        h,
        from_pilot,
    })
}

/// Fills every OFDM symbol from the pilot-symbol estimates: linear in the
/// symbol index between pilots, held constant outside the first and last.
pub fn interpolate_channel(est: &ChannelEstimate, cfg: &FrameConfig) -> Result<ChannelEstimate> {
    let mut pilots = cfg.pilot_symbols.clone();
    pilots.sort_unstable();
    let (Some(&first), Some(&last)) = (pilots.first(), pilots.last()) else {
        return Err(Error::config("channel interpolation needs at least one pilot symbol"));
    };
    let n = est.fft_size;
    let ns = est.num_symbols;
    let mut out = est.clone();
    for a in 0..est.num_rx {
        for s in 0..ns {
            if pilots.binary_search(&s).is_ok() {
                continue;
            }
            let (lo, hi, w) = if s < first {
                (first, first, 0.0)
            } else if s > last {
                (last, last, 0.0)
            } else {
                let i = pilots.partition_point(|&p| p < s);
                let (lo, hi) = (pilots[i - 1], pilots[i]);
                (lo, hi, (s - lo) as f64 / (hi - lo) as f64)
            };
            for f in 0..n {
                let v = est.at(a, lo, f) * (1.0 - w) + est.at(a, hi, f) * w;
                out.h[(a * ns + s) * n + f] = v;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// Bias-corrected estimate `ĥᴴy / ĥᴴĥ`.
    pub x_hat: Complex64,
    /// Effective noise variance `σ² / ĥᴴĥ` of `x_hat`.
    pub noise_var: f64,
    /// Row vector `(ĥᴴĥ + σ²)⁻¹ ĥᴴ`.
    pub weight: Vec<Complex64>,
    /// `weight · y`, biased towards zero.
    pub raw: Complex64,
}

/// MMSE combining of one RE observed on several antennas.
pub fn mmse_equalize(y: &[Complex64], h: &[Complex64], noise_var: f64) -> Result<Equalized> {
    if y.len() != h.len() {
        return Err(Error::Shape {
            op: "mmse_equalize",
            lhs: vec![y.len()],
            rhs: vec![h.len()],
        });
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidNoise(noise_var));
    }
    let gain: f64 = h.iter().map(Complex64::norm_sqr).sum();
    if gain < SINGULAR_THRESHOLD {
        return Err(Error::SingularChannel(gain));
    }
    let matched: Complex64 = h.iter().zip(y).map(|(hi, yi)| hi.conj() * yi).sum();
    let weight: Vec<Complex64> = h.iter().map(|hi| hi.conj() / (gain + noise_var)).collect();
    Ok(Equalized {
        x_hat: matched / gain,
        noise_var: noise_var / gain,
        raw: matched / (gain + noise_var),
        weight,
    })
}

/// Demaps every data RE given a full-grid channel estimate. Singular REs
/// get zero LLRs.
pub fn equalize_and_demap(
    rx: &ReceivedGrid,
    est: &ChannelEstimate,
    cfg: &FrameConfig,
    mode: DemapMode,
) -> Result<LlrGrid> {
    let constellation = cfg.constellation()?;
    let m = cfg.bits_per_symbol;
    let data = cfg.data_indices();
    let mut values = vec![0.0; data.len() * m];
    let mut y = Vec::with_capacity(rx.num_rx);
    let mut h = Vec::with_capacity(rx.num_rx);
    for (out, &re) in values.chunks_exact_mut(m).zip(&data) {
        y.clear();
        y.extend(rx.re(re));
        h.clear();
        h.extend(est.re(re));
        match mmse_equalize(&y, &h, rx.noise_var) {
            Ok(eq) => {
                constellation.demap_into(eq.x_hat, eq.noise_var.max(MIN_EFFECTIVE_NOISE), mode, out)?;
            }
            Err(Error::SingularChannel(_)) => out.fill(0.0),
            Err(e) => return Err(e),
        }
    }
    Ok(LlrGrid {
        bits_per_symbol: m,
        values,
    })
}

/// LS estimation, interpolation, MMSE equalisation and exact demapping.
pub fn baseline_receive(rx: &ReceivedGrid, cfg: &FrameConfig, pilot_seed: u64) -> Result<LlrGrid> {
    let pilots = pilot_sequence(cfg, pilot_seed);
    let est = interpolate_channel(&ls_estimate(rx, cfg, &pilots)?, cfg)?;
    equalize_and_demap(rx, &est, cfg, DemapMode::Exact)
}

/// Same chain with the true channel in place of the estimate.
pub fn perfect_csi_receive(rx: &ReceivedGrid, chan: &ChannelRealization, cfg: &FrameConfig) -> Result<LlrGrid> {
    equalize_and_demap(rx, &ChannelEstimate::perfect(chan), cfg, DemapMode::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, ChannelConfig};
    use crate::mapping::{hard_decision, qam_demap_llr, qam_map, Constellation};
    use crate::ofdm::{apply_channel_freq, build_grid, ResourceGrid};
    use crate::rng::rng_from;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn frame_with_bits(cfg: &FrameConfig, seed: u64) -> (Vec<u8>, ResourceGrid) {
        let mut rng = rng_from(seed);
        let bits: Vec<u8> = (0..cfg.data_bits()).map(|_| rng.random_range(0..2u8)).collect();
        let grid = build_grid(&qam_map(&bits, &cfg.constellation().unwrap()).unwrap(), cfg, 17).unwrap();
        (bits, grid)
    }

    #[test]
    fn ls_division_and_zero_pilot() {
        let cfg = FrameConfig {
            num_symbols: 2,
            fft_size: 2,
            cp_len: 1,
            pilot_symbols: vec![0],
            ..FrameConfig::default()
        };
        let rx = ReceivedGrid {
            num_rx: 1,
            num_symbols: 2,
            fft_size: 2,
            samples: vec![c(0.5, -0.5), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            noise_var: 0.0,
        };
        let est = ls_estimate(&rx, &cfg, &[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(est.at(0, 0, 0), c(0.5, -0.5));
        assert_eq!(est.at(0, 0, 1), c(0.0, -1.0));
        assert!(matches!(
            ls_estimate(&rx, &cfg, &[c(1.0, 0.0), c(0.0, 0.0)]),
            Err(Error::ZeroPilot { symbol: 0, subcarrier: 1 })
        ));
    }

    #[test]
    fn noiseless_ls_is_exact_on_pilots() {
        let cfg = FrameConfig::default();
        let (_, grid) = frame_with_bits(&cfg, 1);
        let chan = generate_channel(&ChannelConfig::default(), &cfg, 5).unwrap();
        let rx = apply_channel_freq(&grid, &chan, 0.0, 0).unwrap();
        let est = ls_estimate(&rx, &cfg, &grid.pilot_values).unwrap();
        for a in 0..2 {
            for &s in &cfg.pilot_symbols {
                for f in 0..cfg.fft_size {
                    assert!((est.at(a, s, f) - chan.at(a, s, f)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ls_error_variance() {
        let cfg = FrameConfig {
            num_symbols: 2,
            fft_size: 1000,
            pilot_symbols: vec![0],
            ..FrameConfig::default()
        };
        let chan = ChannelRealization::constant(1, &cfg, c(0.3, 0.7));
        let noise = 0.05;
        let mut sum = 0.0;
        let mut count = 0usize;
        for frame in 0..100 {
            let (_, grid) = frame_with_bits(&cfg, frame);
            let rx = apply_channel_freq(&grid, &chan, noise, 1000 + frame).unwrap();
            let est = ls_estimate(&rx, &cfg, &grid.pilot_values).unwrap();
            for f in 0..cfg.fft_size {
                sum += (est.at(0, 0, f) - chan.at(0, 0, f)).norm_sqr();
                count += 1;
            }
        }
        // QPSK pilots have |x_p| = 1.
        let var = sum / count as f64;
        assert!((var / noise - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn interpolation_rules() {
        let cfg = FrameConfig::default();
        // Linear-in-time channel between the pilots at 2 and 11.
        let mut est = ChannelEstimate {
            num_rx: 1,
            num_symbols: 14,
            fft_size: 128,
            h: vec![Complex64::default(); 14 * 128],
            from_pilot: cfg.pilot_mask(),
        };
        let truth = |s: usize, f: usize| c(0.1 * s as f64 - 0.2, 0.01 * f as f64 - 0.05 * s as f64);
        for &s in &[2usize, 11] {
            for f in 0..128 {
                est.h[s * 128 + f] = truth(s, f);
            }
        }
        let full = interpolate_channel(&est, &cfg).unwrap();
        for s in 2..=11 {
            for f in 0..128 {
                assert!((full.at(0, s, f) - truth(s, f)).norm() < 1e-12);
            }
        }
        for f in 0..128 {
            assert_eq!(full.at(0, 0, f), truth(2, f));
            assert_eq!(full.at(0, 13, f), truth(11, f));
        }

        let single = FrameConfig {
            pilot_symbols: vec![5],
            ..FrameConfig::default()
        };
        let mut est1 = est.clone();
        est1.h.iter_mut().for_each(|h| *h = Complex64::default());
        for f in 0..128 {
            est1.h[5 * 128 + f] = c(f as f64, 1.0);
        }
        let full = interpolate_channel(&est1, &single).unwrap();
        for s in 0..14 {
            assert_eq!(full.at(0, s, 9), c(9.0, 1.0));
        }

        let none = FrameConfig {
            pilot_symbols: vec![],
            ..FrameConfig::default()
        };
        assert!(matches!(interpolate_channel(&est, &none), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn mmse_reference_values() {
        let x = c(0.3, -0.9);
        let eq = mmse_equalize(&[x, x], &[c(1.0, 0.0), c(1.0, 0.0)], 0.0).unwrap();
        assert!((eq.x_hat - x).norm() < 1e-15);

        let one = c(1.0, 0.0);
        let eq = mmse_equalize(&[one, one], &[one, one], 1.0).unwrap();
        for w in &eq.weight {
            assert!((w - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        }
        assert!((eq.raw - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((eq.x_hat - one).norm() < 1e-15);
        assert!((eq.noise_var - 0.5).abs() < 1e-15);

        let zero = Complex64::default();
        assert!(matches!(mmse_equalize(&[one, one], &[zero, zero], 1.0), Err(Error::SingularChannel(_))));
    }

    #[test]
    fn noiseless_flat_channel_is_error_free() {
        let cfg = FrameConfig::default();
        let (bits, grid) = frame_with_bits(&cfg, 3);
        let chan = ChannelRealization::constant(2, &cfg, c(1.0, 0.0));
        let rx = apply_channel_freq(&grid, &chan, 0.0, 0).unwrap();
        let llr = baseline_receive(&rx, &cfg, 17).unwrap();
        assert_eq!(llr.hard_bits(), bits);
    }

    #[test]
    fn baseline_equals_manual_composition() {
        let cfg = FrameConfig::default();
        let (_, grid) = frame_with_bits(&cfg, 4);
        let chan = generate_channel(&ChannelConfig::default(), &cfg, 6).unwrap();
        let rx = apply_channel_freq(&grid, &chan, 0.05, 8).unwrap();
        let auto = baseline_receive(&rx, &cfg, 17).unwrap();

        let est = interpolate_channel(&ls_estimate(&rx, &cfg, &pilot_sequence(&cfg, 17)).unwrap(), &cfg).unwrap();
        let q = Constellation::new(64).unwrap();
        let mut manual = Vec::new();
        for re in cfg.data_indices() {
            let y: Vec<_> = rx.re(re).collect();
            let h: Vec<_> = est.re(re).collect();
            let eq = mmse_equalize(&y, &h, rx.noise_var).unwrap();
            manual.extend(qam_demap_llr(eq.x_hat, eq.noise_var, &q, DemapMode::Exact).unwrap());
        }
        assert_eq!(auto.values, manual);
    }

    #[test]
    fn erased_res_give_zero_llrs() {
        let cfg = FrameConfig::default();
        let (_, grid) = frame_with_bits(&cfg, 5);
        let mut chan = ChannelRealization::constant(2, &cfg, c(1.0, 0.0));
        // Null RE (0, 0) on both antennas.
        chan.h[0] = Complex64::default();
        chan.h[cfg.num_res()] = Complex64::default();
        let rx = apply_channel_freq(&grid, &chan, 0.01, 1).unwrap();
        let llr = perfect_csi_receive(&rx, &chan, &cfg).unwrap();
        assert!(llr.values[..6].iter().all(|&v| v == 0.0));
        assert!(llr.values[6..12].iter().all(|&v| v != 0.0));
    }

    /// Q-function oracle for uncoded QPSK, single antenna, perfect CSI.
    #[test]
    fn qpsk_awgn_matches_q_function() {
        let cfg = FrameConfig {
            num_symbols: 14,
            fft_size: 128,
            bits_per_symbol: 2,
            code_rate: 1.0,
            ..FrameConfig::default()
        };
        let ebno_db: f64 = 4.0;
        let noise = crate::channel::ebno_to_noise_var(ebno_db, 2, 1.0);
        let chan = ChannelRealization::constant(1, &cfg, c(1.0, 0.0));
        let (mut errors, mut total) = (0usize, 0usize);
        let mut frame = 0;
        while total < 1_000_000 {
            let (bits, grid) = frame_with_bits(&cfg, 10_000 + frame);
            let rx = apply_channel_freq(&grid, &chan, noise, 20_000 + frame).unwrap();
            let llr = perfect_csi_receive(&rx, &chan, &cfg).unwrap();
            errors += hard_decision(&llr.values).iter().zip(&bits).filter(|(a, b)| a != b).count();
            total += bits.len();
            frame += 1;
        }
        let ber = errors as f64 / total as f64;
        // Q(sqrt(2 * 10^0.4)) = 0.0125008...
        let expected = 0.012500818040737;
        assert!((ber / expected - 1.0).abs() < 0.03, "ber {ber}");
    }

    #[test]
    fn equalizer_is_unbiased() {
        let mut rng = rng_from(21);
        let h = [c(0.8, -0.3), c(-0.2, 0.5)];
        let x = c(0.7, 0.2);
        let noise: f64 = 0.5;
        let sd = (noise / 2.0).sqrt();
        let trials = 100_000;
        let mut mean = Complex64::default();
        for _ in 0..trials {
            let y: Vec<Complex64> = h
                .iter()
                .map(|hi| hi * x + c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * sd)
                .collect();
            mean += mmse_equalize(&y, &h, noise).unwrap().x_hat;
        }
        mean /= trials as f64;
        let gain: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        let se = (noise / gain / trials as f64).sqrt();
        assert!((mean - x).norm() < 4.0 * se, "{mean}");
    }

    #[test]
    fn common_scaling_preserves_decisions() {
        let cfg = FrameConfig::default();
        let (_, grid) = frame_with_bits(&cfg, 9);
        let chan = generate_channel(&ChannelConfig::default(), &cfg, 10).unwrap();
        let rx = apply_channel_freq(&grid, &chan, 0.1, 11).unwrap();
        let a = perfect_csi_receive(&rx, &chan, &cfg).unwrap();
        let k = c(-1.7, 2.3);
        let mut rx2 = rx.clone();
        rx2.samples.iter_mut().for_each(|y| *y *= k);
        rx2.noise_var *= k.norm_sqr();
        let mut chan2 = chan.clone();
        chan2.h.iter_mut().for_each(|h| *h *= k);
        let b = perfect_csi_receive(&rx2, &chan2, &cfg).unwrap();
        assert_eq!(a.hard_bits(), b.hard_bits());
    }
}
