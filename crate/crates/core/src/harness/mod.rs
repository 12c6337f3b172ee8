//! Experiment drivers behind the command-line tool: BER sweeps, training,
//! architecture sweeps, payload evaluation and gradient checks. All output
//! is CSV text that depends only on the config and seed.

mod arch;
mod config;
mod gradcheck;
mod payload_eval;
mod sim;
mod train;

pub use arch::{arch_csv, parse_arch_csv, run_arch_sweep, select_architecture, ArchRow, ARCH_HEADER, FINAL_LOSS_WINDOW};
pub use config::{parse_payload_spec, ExperimentConfig, ReceiverKind};
pub use gradcheck::{gradcheck_report, run_gradcheck};
pub use payload_eval::{
    min_snr_to_sentinel, mse_monotonicity_violations, payload_csv, run_payload_eval, PayloadPoint, PAYLOAD_HEADER,
};
pub use sim::{ber_csv, format_snr, monotonicity_violations, noise_var_for, run_ber_sweep, BerPoint, Link, NeuralModel, BER_HEADER};
pub use train::{loss_csv, run_train, LOSS_HEADER};
