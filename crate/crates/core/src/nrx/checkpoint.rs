//! Checkpoint file: magic `NRX1`, u32 version, u32 count of config
//! key/value pairs (each a u32-length-prefixed UTF-8 string), u32 tensor
//! count, then per tensor its length-prefixed name, u32 rank, u64 dims and
//! little-endian f64 values. All integers are little-endian.

use std::path::Path;

use crate::nn::Tensor;
use crate::{Error, Result};

use super::{ModelParams, NeuralReceiverConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NRX1";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn config_pairs(cfg: &NeuralReceiverConfig) -> Vec<(&'static str, String)> {
    let pilots: Vec<String> = cfg.pilot_symbols.iter().map(usize::to_string).collect();
    vec![
        ("num_blocks", cfg.num_blocks.to_string()),
        ("num_heads", cfg.num_heads.to_string()),
        ("embed_dim", cfg.embed_dim.to_string()),
        ("ffn_dim", cfg.ffn_dim.to_string()),
        ("bits_per_symbol", cfg.bits_per_symbol.to_string()),
        ("num_rx", cfg.num_rx.to_string()),
        ("num_symbols", cfg.num_symbols.to_string()),
        ("fft_size", cfg.fft_size.to_string()),
        ("pilot_symbols", pilots.join(",")),
    ]
}

pub fn checkpoint_bytes(params: &ModelParams, cfg: &NeuralReceiverConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.num_parameters() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    let pairs = config_pairs(cfg);
    put_u32(&mut out, pairs.len() as u32);
    for (k, v) in &pairs {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }
    put_u32(&mut out, params.tensors().len() as u32);
    for (name, t) in params.names().iter().zip(params.tensors()) {
        put_str(&mut out, name);
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(params: &ModelParams, cfg: &NeuralReceiverConfig, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(params, cfg))?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CorruptCheckpoint(format!(
                "truncated at byte {} (needed {n} more bytes)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::CorruptCheckpoint(format!("invalid UTF-8 at byte {at}")))
    }
}

fn parse_config(pairs: &[(String, String)]) -> Result<NeuralReceiverConfig> {
    let get = |key: &str| -> Result<&str> {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::CorruptCheckpoint(format!("config key {key} missing")))
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::CorruptCheckpoint(format!("config key {key} is not an integer")))
    };
    let pilots = get("pilot_symbols")?;
    let pilot_symbols = if pilots.is_empty() {
        Vec::new()
    } else {
        pilots
            .split(',')
            .map(|p| {
                p.parse()
                    .map_err(|_| Error::CorruptCheckpoint("bad pilot_symbols value".into()))
            })
            .collect::<Result<_>>()?
    };
    let cfg = NeuralReceiverConfig {
        num_blocks: num("num_blocks")?,
        num_heads: num("num_heads")?,
        embed_dim: num("embed_dim")?,
        ffn_dim: num("ffn_dim")?,
        bits_per_symbol: num("bits_per_symbol")?,
        num_rx: num("num_rx")?,
        num_symbols: num("num_symbols")?,
        fft_size: num("fft_size")?,
        pilot_symbols,
    };
    cfg.validate()
        .map_err(|e| Error::CorruptCheckpoint(format!("stored config is invalid: {e}")))?;
    Ok(cfg)
}

pub fn parse_checkpoint(buf: &[u8]) -> Result<(ModelParams, NeuralReceiverConfig)> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let pairs = (0..r.u32()?)
        .map(|_| Ok((r.string()?, r.string()?)))
        .collect::<Result<Vec<_>>>()?;
    let cfg = parse_config(&pairs)?;

    let count = r.u32()? as usize;
    let mut names = Vec::new();
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= (buf.len() - r.pos) / 8)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("tensor {name} larger than the file")))?;
        let data = r
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        names.push(name);
        tensors.push(Tensor::new(shape, data)?);
    }
    if r.pos != buf.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    let params = ModelParams::from_parts(names, tensors);
    if !params.matches(&cfg) {
        return Err(Error::CorruptCheckpoint("tensor shapes disagree with the stored config".into()));
    }
    Ok((params, cfg))
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, NeuralReceiverConfig)> {
    parse_checkpoint(&std::fs::read(path)?)
}

/// Loads a checkpoint and requires its stored config to equal `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &NeuralReceiverConfig) -> Result<ModelParams> {
    let (params, cfg) = load_checkpoint(path)?;
    if &cfg != expected {
        let diff: Vec<String> = config_pairs(&cfg)
            .into_iter()
            .zip(config_pairs(expected))
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, b)| format!("{} = {} (requested {})", a.0, a.1, b.1))
            .collect();
        return Err(Error::CheckpointMismatch(diff.join(", ")));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nrx::{build_model, tiny_config};

    #[test]
    fn roundtrip_is_bit_exact() {
        let cfg = tiny_config();
        let p = build_model(&cfg, 5).unwrap();
        let bytes = checkpoint_bytes(&p, &cfg);
        assert_eq!(&bytes[..4], b"NRX1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        let (q, c) = parse_checkpoint(&bytes).unwrap();
        assert_eq!(c, cfg);
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            let ab: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
        assert_eq!(checkpoint_bytes(&q, &c), bytes);
    }

    #[test]
    fn every_truncation_is_detected() {
        let cfg = tiny_config();
        let bytes = checkpoint_bytes(&build_model(&cfg, 0).unwrap(), &cfg);
        for cut in (0..bytes.len()).step_by(7) {
            assert!(matches!(parse_checkpoint(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "{cut}");
        }
    }

    #[test]
    fn bad_magic_and_trailing_bytes() {
        let cfg = tiny_config();
        let mut bytes = checkpoint_bytes(&build_model(&cfg, 0).unwrap(), &cfg);
        bytes.push(0);
        assert!(matches!(parse_checkpoint(&bytes), Err(Error::CorruptCheckpoint(_))));
        bytes[0] = b'X';
        assert!(matches!(parse_checkpoint(&bytes), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn block_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.nrx");
        let cfg = NeuralReceiverConfig {
            num_blocks: 4,
            ..tiny_config()
        };
        save_checkpoint(&build_model(&cfg, 0).unwrap(), &cfg, &path).unwrap();
        let want = NeuralReceiverConfig {
            num_blocks: 6,
            ..tiny_config()
        };
        let err = load_checkpoint_for(&path, &want).unwrap_err();
        assert!(matches!(&err, Error::CheckpointMismatch(m) if m.contains("num_blocks = 4")), "{err}");
        assert!(load_checkpoint_for(&path, &cfg).is_ok());
    }
}
