use crate::{Error, Result};

use super::PayloadMeta;

pub const WAV_HEADER_LEN: usize = 44;
/// GPS coordinates travel as degrees times this factor in an `i32`.
pub const GPS_SCALE: f64 = 1e7;

const LAT_LIMIT: i32 = 90 * 10_000_000;
const LON_LIMIT: i32 = 180 * 10_000_000;

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Binary PGM (`P5`) or PPM (`P6`) with maxval at most 255.
pub(super) fn parse_pnm(file: &[u8]) -> Result<(Vec<u8>, PayloadMeta)> {
    let channels = match file.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::format(0, "expected P5 or P6 magic")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match file.get(pos) {
                Some(&b) if is_space(b) => pos += 1,
                Some(b'#') => {
                    while file.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while file.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&file[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::format(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(2, "image dimensions must be positive"));
    }
    if !(1..=255).contains(&maxval) {
        return Err(Error::format(pos, format!("maxval {maxval} is not an 8-bit depth")));
    }
    if !file.get(pos).copied().is_some_and(is_space) {
        return Err(Error::format(pos, "expected whitespace after maxval"));
    }
    pos += 1;
    let body_len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format(2, "image dimensions overflow"))?;
    let available = file.len() - pos;
    if available != body_len {
        return Err(Error::format(
            pos + available.min(body_len),
            format!("pixel data is {available} bytes, header implies {body_len}"),
        ));
    }
    Ok((
        file[pos..].to_vec(),
        PayloadMeta::Image {
            header: file[..pos].to_vec(),
            width,
            height,
            channels,
        },
    ))
}

fn le_u16(file: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([file[at], file[at + 1]])
}

fn le_u32(file: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(file[at..at + 4].try_into().expect("4 bytes"))
}

/// Canonical 44-byte-header WAV, PCM16 mono.
pub(super) fn parse_wav(file: &[u8]) -> Result<(Vec<u8>, PayloadMeta)> {
    if file.len() < WAV_HEADER_LEN {
        return Err(Error::format(file.len(), "file shorter than the 44-byte WAV header"));
    }
    for (at, tag) in [(0, b"RIFF"), (8, b"WAVE"), (12, b"fmt "), (36, b"data")] {
        if &file[at..at + 4] != tag {
            return Err(Error::format(at, format!("expected {:?}", std::str::from_utf8(tag).unwrap())));
        }
    }
    if le_u32(file, 4) as usize != file.len() - 8 {
        return Err(Error::format(4, "RIFF size does not match the file length"));
    }
    let checks = [
        (16, le_u32(file, 16), 16, "fmt chunk size must be 16"),
        (20, u32::from(le_u16(file, 20)), 1, "only PCM (format 1) is supported"),
        (22, u32::from(le_u16(file, 22)), 1, "only mono audio is supported"),
        (32, u32::from(le_u16(file, 32)), 2, "block align must be 2"),
        (34, u32::from(le_u16(file, 34)), 16, "only 16-bit samples are supported"),
    ];
    for (at, got, want, msg) in checks {
        if got != want {
            return Err(Error::format(at, msg));
        }
    }
    let sample_rate = le_u32(file, 24);
    if le_u32(file, 28) != sample_rate.wrapping_mul(2) {
        return Err(Error::format(28, "byte rate must be twice the sample rate"));
    }
    let data_len = le_u32(file, 40) as usize;
    if data_len != file.len() - WAV_HEADER_LEN || data_len % 2 != 0 {
        return Err(Error::format(40, "data size does not match the sample bytes"));
    }
    Ok((
        file[WAV_HEADER_LEN..].to_vec(),
        PayloadMeta::Audio {
            header: file[..WAV_HEADER_LEN].to_vec(),
            sample_rate,
            num_samples: data_len / 2,
        },
    ))
}

/// Text lines `lat,lon` in decimal degrees; blank lines are skipped.
pub(super) fn parse_gps(file: &[u8]) -> Result<(Vec<u8>, PayloadMeta)> {
    let text = std::str::from_utf8(file).map_err(|e| Error::format(e.valid_up_to(), "GPS file is not UTF-8"))?;
    let mut body = Vec::new();
    let mut offset = 0;
    let mut points = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let content = line.trim();
        if content.is_empty() {
            continue;
        }
        let (lat, lon) = content
            .split_once(',')
            .ok_or_else(|| Error::format(start, "expected \"lat,lon\""))?;
        for (value, limit) in [(lat, LAT_LIMIT), (lon, LON_LIMIT)] {
            let deg: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::format(start, format!("invalid coordinate {value:?}")))?;
            let fixed = (deg * GPS_SCALE).round();
            if !(fixed.abs() <= f64::from(limit)) {
                return Err(Error::format(start, format!("coordinate {value} out of range")));
            }
            body.extend_from_slice(&(fixed as i32).to_be_bytes());
        }
        points += 1;
    }
    Ok((body, PayloadMeta::Gps { points }))
}

/// Little-endian binary32 records of `record` bytes each.
pub(super) fn parse_f32_records(
    file: &[u8],
    record: usize,
    meta: impl FnOnce(usize) -> PayloadMeta,
) -> Result<(Vec<u8>, PayloadMeta)> {
    if file.len() % record != 0 {
        let whole = file.len() - file.len() % record;
        return Err(Error::format(whole, format!("trailing partial record of {} bytes", file.len() - whole)));
    }
    if let Some(i) = file
        .chunks_exact(4)
        .position(|c| !f32::from_le_bytes(c.try_into().expect("4 bytes")).is_finite())
    {
        return Err(Error::format(4 * i, "non-finite sample"));
    }
    Ok((file.to_vec(), meta(file.len() / record)))
}

fn gps_fixed(body: &[u8]) -> impl Iterator<Item = i32> + '_ {
    body.chunks_exact(4).map(|c| i32::from_be_bytes(c.try_into().expect("4 bytes")))
}

fn f32_values(body: &[u8]) -> impl Iterator<Item = f32> + '_ {
    body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
}

pub(super) fn sanitize(body: &mut [u8], meta: &PayloadMeta) {
    match meta {
        PayloadMeta::Lidar { .. } | PayloadMeta::Radar { .. } => {
            for c in body.chunks_exact_mut(4) {
                if !f32::from_le_bytes((&*c).try_into().expect("4 bytes")).is_finite() {
                    c.copy_from_slice(&0f32.to_le_bytes());
                }
            }
        }
        PayloadMeta::Gps { .. } => {
            for (i, c) in body.chunks_exact_mut(4).enumerate() {
                let limit = if i % 2 == 0 { LAT_LIMIT } else { LON_LIMIT };
                let v = i32::from_be_bytes((&*c).try_into().expect("4 bytes")).clamp(-limit, limit);
                c.copy_from_slice(&v.to_be_bytes());
            }
        }
        PayloadMeta::Image { .. } | PayloadMeta::Audio { .. } => {}
    }
}

fn format_fixed(v: i32) -> String {
    let sign = if v < 0 { "-" } else { "" };
    let a = v.unsigned_abs();
    format!("{sign}{}.{:07}", a / 10_000_000, a % 10_000_000)
}

/// File bytes for a body; GPS text is written in canonical 7-decimal form.
pub(super) fn assemble(body: &[u8], meta: &PayloadMeta) -> Vec<u8> {
    match meta {
        PayloadMeta::Image { header, .. } | PayloadMeta::Audio { header, .. } => {
            let mut out = header.clone();
            out.extend_from_slice(body);
            out
        }
        PayloadMeta::Gps { .. } => {
            let v: Vec<i32> = gps_fixed(body).collect();
            v.chunks_exact(2)
                .map(|p| format!("{},{}\n", format_fixed(p[0]), format_fixed(p[1])))
                .collect::<String>()
                .into_bytes()
        }
        PayloadMeta::Lidar { .. } | PayloadMeta::Radar { .. } => body.to_vec(),
    }
}

/// Metric samples: pixels as 0..=255, audio normalised to [-1, 1), GPS in
/// degrees, floats as stored.
pub(super) fn samples(body: &[u8], meta: &PayloadMeta) -> Vec<f64> {
    match meta {
        PayloadMeta::Image { .. } => body.iter().map(|&b| f64::from(b)).collect(),
        PayloadMeta::Audio { .. } => body
            .chunks_exact(2)
            .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
            .collect(),
        PayloadMeta::Gps { .. } => gps_fixed(body).map(|v| f64::from(v) / GPS_SCALE).collect(),
        PayloadMeta::Lidar { .. } | PayloadMeta::Radar { .. } => f32_values(body).map(f64::from).collect(),
    }
}
