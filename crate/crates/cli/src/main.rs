//! `nrx`: BER sweeps, training, architecture sweeps, payload evaluation
//! and gradient checks for the OFDM neural-receiver simulator.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 configuration
//! error, 3 input-format error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nrx_core::harness::{
    arch_csv, ber_csv, gradcheck_report, loss_csv, monotonicity_violations, mse_monotonicity_violations,
    parse_payload_spec, payload_csv, run_arch_sweep, run_ber_sweep, run_gradcheck, run_payload_eval, run_train,
    select_architecture, ExperimentConfig, NeuralModel, ReceiverKind,
};
use nrx_core::nrx::{load_checkpoint_for, save_checkpoint};
use nrx_core::payload::{synth::synthetic_file, Modality};
use nrx_core::Error;

#[derive(Parser)]
#[command(name = "nrx", version, about = "Link-level simulator for a transformer neural receiver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Model checkpoint to read (sweeps) or write (train).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// BER/BLER versus Eb/N0 for the configured receivers.
    BerSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model per (blocks, heads) pair and pick the best fit.
    ArchSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Train the neural receiver; writes the checkpoint and a loss CSV.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Send payload files over the link and report PSNR/MSE/RMSE.
    PayloadEval {
        #[command(flatten)]
        common: Common,
        /// `modality:path`, repeatable. Synthetic files are used when no
        /// payload is given here or in the config.
        #[arg(long = "payload")]
        payloads: Vec<String>,
    },
    /// Finite-difference check of every layer and a tiny end-to-end model.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::CheckpointMismatch(_) => 2,
            Error::Format { .. } | Error::CorruptCheckpoint(_) => 3,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn load_config(common: &Common) -> CliResult<(ExperimentConfig, u64)> {
    let cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(2, format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::new(1, format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(common: &Common, cfg: &ExperimentConfig) -> CliResult<Option<NeuralModel>> {
    if !cfg.receivers.contains(&ReceiverKind::Neural) {
        return Ok(None);
    }
    let path = common
        .checkpoint
        .as_ref()
        .ok_or_else(|| Failure::new(2, "receiver = neural requires --checkpoint"))?;
    let config = cfg.model_config();
    let params = load_checkpoint_for(path, &config).map_err(|e| match e {
        Error::Io(io) => Failure::new(3, format!("cannot read checkpoint {}: {io}", path.display())),
        other => other.into(),
    })?;
    Ok(Some(NeuralModel { config, params }))
}

fn ber_sweep(common: &Common) -> CliResult {
    let (cfg, seed) = load_config(common)?;
    let model = load_model(common, &cfg)?;
    let points = run_ber_sweep(&cfg, model.as_ref(), seed)?;
    for w in monotonicity_violations(&points) {
        eprintln!("warning: {w}");
    }
    write_output(common.out.as_deref(), &ber_csv(&points))
}

fn train(common: &Common) -> CliResult {
    let (cfg, seed) = load_config(common)?;
    let checkpoint = common
        .checkpoint
        .as_ref()
        .ok_or_else(|| Failure::new(2, "train requires --checkpoint <path> for the trained model"))?;
    let every = (cfg.train.iterations / 20).max(1);
    let (model, report) = run_train(&cfg, seed, |i, loss| {
        if i % every == 0 {
            eprintln!("iteration {i}: loss {loss:.5}");
        }
    })?;
    save_checkpoint(&model.params, &model.config, checkpoint)
        .map_err(|e| Failure::new(1, format!("cannot write {}: {e}", checkpoint.display())))?;
    write_output(common.out.as_deref(), &loss_csv(&report))
}

fn arch_sweep(common: &Common) -> CliResult {
    let (cfg, seed) = load_config(common)?;
    let every = (cfg.train.iterations / 5).max(1);
    let rows = run_arch_sweep(&cfg, seed, |b, h, i, loss| {
        if i % every == 0 {
            eprintln!("blocks {b}, heads {h}, iteration {i}: loss {loss:.5}");
        }
    })?;
    if let Some((b, h)) = select_architecture(&rows) {
        eprintln!("selected num_blocks = {b}, num_heads = {h}");
    }
    write_output(common.out.as_deref(), &arch_csv(&rows))
}

fn payload_eval(common: &Common, extra: &[String]) -> CliResult {
    let (cfg, seed) = load_config(common)?;
    let model = load_model(common, &cfg)?;
    let mut specs = cfg.payload_files.clone();
    for item in extra {
        specs.push(parse_payload_spec(item)?);
    }
    let payloads: Vec<(Modality, Vec<u8>)> = if specs.is_empty() {
        Modality::ALL.iter().map(|&m| (m, synthetic_file(m, seed))).collect()
    } else {
        specs
            .iter()
            .map(|(m, path)| {
                fs::read(path)
                    .map(|bytes| (*m, bytes))
                    .map_err(|e| Failure::new(3, format!("cannot read payload {}: {e}", path.display())))
            })
            .collect::<CliResult<_>>()?
    };
    let points = run_payload_eval(&cfg, &payloads, model.as_ref(), seed)?;
    for w in mse_monotonicity_violations(&points) {
        eprintln!("warning: {w}");
    }
    write_output(common.out.as_deref(), &payload_csv(&points))
}

fn gradcheck(common: &Common, corrupt: bool) -> CliResult {
    let seed = match &common.config {
        Some(_) => load_config(common)?.1,
        None => common.seed.unwrap_or(0),
    };
    let results = run_gradcheck(seed, corrupt)?;
    write_output(common.out.as_deref(), &gradcheck_report(&results))?;
    if results.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(Failure::new(1, "gradient check failed"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BerSweep { common } => ber_sweep(common),
        Command::ArchSweep { common } => arch_sweep(common),
        Command::Train { common } => train(common),
        Command::PayloadEval { common, payloads } => payload_eval(common, payloads),
        Command::Gradcheck {
            common,
            corrupt_backward,
        } => gradcheck(common, *corrupt_backward),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
