use std::fmt::Write as _;

use crate::nrx::{train_with_progress, TrainReport};
use crate::Result;

use super::{ExperimentConfig, NeuralModel};

pub const LOSS_HEADER: &str = "iteration,loss,bit_accuracy";

/// Trains the configured model; `progress` receives `(iteration, loss)`.
pub fn run_train(
    cfg: &ExperimentConfig,
    seed: u64,
    progress: impl FnMut(usize, f64),
) -> Result<(NeuralModel, TrainReport)> {
    cfg.validate()?;
    let model_cfg = cfg.model_config();
    let (params, report) = train_with_progress(&model_cfg, &cfg.frame, &cfg.channel, &cfg.train, seed, progress)?;
    Ok((
        NeuralModel {
            config: model_cfg,
            params,
        },
        report,
    ))
}

/// Per-iteration loss and bit accuracy (no timing, so reruns are identical).
pub fn loss_csv(report: &TrainReport) -> String {
    let mut s = String::from(LOSS_HEADER);
    s.push('\n');
    for (i, (l, a)) in report.loss_history.iter().zip(&report.accuracy_history).enumerate() {
        let _ = writeln!(s, "{},{l},{a}", i + 1);
    }
    s
}
