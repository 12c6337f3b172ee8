use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("parity-check matrix is rank deficient (rank {rank} of {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid noise variance {0}")]
    InvalidNoise(f64),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("grid capacity mismatch: expected {expected} data symbols, got {actual}")]
    Capacity { expected: usize, actual: usize },

    #[error("singular channel (|h|^2 = {0:e})")]
    SingularChannel(f64),

    #[error("zero pilot value at symbol {symbol}, subcarrier {subcarrier}")]
    ZeroPilot { symbol: usize, subcarrier: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(f64),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint does not match the requested model: {0}")]
    CheckpointMismatch(String),

    #[error("training diverged at iteration {iteration} (loss {loss})")]
    Diverged { iteration: usize, loss: f64 },

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}
