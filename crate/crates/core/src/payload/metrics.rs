use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Psnr,
    Mse,
    Rmse,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Mse => "mse",
            MetricKind::Rmse => "rmse",
        }
    }

    /// Value reached by a perfect reconstruction.
    pub fn sentinel(self) -> f64 {
        match self {
            MetricKind::Psnr => f64::INFINITY,
            MetricKind::Mse | MetricKind::Rmse => 0.0,
        }
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Metric("empty signals".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    mse(a, b).map(f64::sqrt)
}

/// `10 log10(max² / mse)`, or `+∞` for identical inputs.
pub fn psnr(a: &[f64], b: &[f64], max_value: f64) -> Result<f64> {
    let e = mse(a, b)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max_value * max_value / e).log10()
    })
}
