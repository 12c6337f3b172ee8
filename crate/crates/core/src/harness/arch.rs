//! Architecture sweep over encoder depth and head count.

use std::fmt::Write as _;

use crate::{Error, Result};

use super::{run_ber_sweep, run_train, sim::format_snr, ExperimentConfig, ReceiverKind};

pub const ARCH_HEADER: &str = "num_blocks,num_heads,snr_db,ber,train_final_bce";

/// Iterations averaged for the reported final training loss.
pub const FINAL_LOSS_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchRow {
    pub num_blocks: usize,
    pub num_heads: usize,
    pub snr_db: f64,
    pub ber: f64,
    pub train_final_bce: f64,
}

/// Trains one model per `(blocks, heads)` pair with the same seed and
/// evaluates each on the same frames at every SNR point.
pub fn run_arch_sweep(
    cfg: &ExperimentConfig,
    seed: u64,
    mut progress: impl FnMut(usize, usize, usize, f64),
) -> Result<Vec<ArchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &blocks in &cfg.arch_blocks {
        for &heads in &cfg.arch_heads {
            let variant = ExperimentConfig {
                num_blocks: blocks,
                num_heads: heads,
                receivers: vec![ReceiverKind::Neural],
                ..cfg.clone()
            };
            let (model, report) = run_train(&variant, seed, |i, l| progress(blocks, heads, i, l))?;
            let final_bce = report.final_loss(FINAL_LOSS_WINDOW);
            for p in run_ber_sweep(&variant, Some(&model), seed)? {
                rows.push(ArchRow {
                    num_blocks: blocks,
                    num_heads: heads,
                    snr_db: p.snr_db,
                    ber: p.ber(),
                    train_final_bce: final_bce,
                });
            }
        }
    }
    Ok(rows)
}

/// Lowest BER at the highest SNR point; ties go to fewer blocks, then
/// fewer heads.
pub fn select_architecture(rows: &[ArchRow]) -> Option<(usize, usize)> {
    let top = rows.iter().map(|r| r.snr_db).max_by(f64::total_cmp)?;
    rows.iter()
        .filter(|r| r.snr_db == top)
        .min_by(|a, b| {
            a.ber
                .total_cmp(&b.ber)
                .then(a.num_blocks.cmp(&b.num_blocks))
                .then(a.num_heads.cmp(&b.num_heads))
        })
        .map(|r| (r.num_blocks, r.num_heads))
}

pub fn arch_csv(rows: &[ArchRow]) -> String {
    let mut s = String::from(ARCH_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.num_blocks,
            r.num_heads,
            format_snr(r.snr_db),
            r.ber,
            r.train_final_bce
        );
    }
    s
}

/// Reads rows back from [`arch_csv`] output.
pub fn parse_arch_csv(text: &str) -> Result<Vec<ArchRow>> {
    let mut lines = text.lines();
    let mut offset = 0;
    match lines.next() {
        Some(h) if h.trim() == ARCH_HEADER => offset += h.len() + 1,
        _ => return Err(Error::format(0, format!("expected header {ARCH_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for line in lines {
        let start = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::format(start, format!("malformed arch row {line:?}"));
        if f.len() != 5 {
            return Err(bad());
        }
        rows.push(ArchRow {
            num_blocks: f[0].parse().map_err(|_| bad())?,
            num_heads: f[1].parse().map_err(|_| bad())?,
            snr_db: f[2].parse().map_err(|_| bad())?,
            ber: f[3].parse().map_err(|_| bad())?,
            train_final_bce: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}
