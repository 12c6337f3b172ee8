//! Small well-formed example files for each modality.

use rand::Rng;

use crate::rng::rng_from;

use super::{formats::WAV_HEADER_LEN, Modality};

/// Binary PGM with the given size and pixel bytes.
pub fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Canonical PCM16 mono WAV.
pub fn wav(sample_rate: u32, samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(WAV_HEADER_LEN + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn f32_file(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// A deterministic example file: a 16x16 gradient image, 256 audio
/// samples of a tone, 16 GPS fixes, 32 LiDAR points or 64 radar samples.
pub fn synthetic_file(modality: Modality, seed: u64) -> Vec<u8> {
    let mut rng = rng_from(seed);
    match modality {
        Modality::Image => {
            let px: Vec<u8> = (0..256)
                .map(|i| ((i % 16) * 12 + (i / 16) * 3 + rng.random_range(0..8)) as u8)
                .collect();
            pgm(16, 16, &px)
        }
        Modality::Audio => {
            let s: Vec<i16> = (0..256)
                .map(|i| {
                    let t = i as f64 / 8000.0;
                    (12000.0 * (2.0 * std::f64::consts::PI * 440.0 * t).sin()) as i16 + rng.random_range(-200..200)
                })
                .collect();
            wav(8000, &s)
        }
        Modality::Gps => {
            let mut text = String::new();
            for _ in 0..16 {
                let lat: i32 = rng.random_range(-900_000_000..=900_000_000);
                let lon: i32 = rng.random_range(-1_800_000_000..=1_800_000_000);
                let f = |v: i32| {
                    let a = v.unsigned_abs();
                    format!("{}{}.{:07}", if v < 0 { "-" } else { "" }, a / 10_000_000, a % 10_000_000)
                };
                text.push_str(&format!("{},{}\n", f(lat), f(lon)));
            }
            text.into_bytes()
        }
        Modality::Lidar => {
            let v: Vec<f32> = (0..96).map(|_| rng.random_range(-50.0f32..50.0)).collect();
            f32_file(&v)
        }
        Modality::Radar => {
            let v: Vec<f32> = (0..128).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            f32_file(&v)
        }
    }
}
