//! Minimal reverse-mode automatic differentiation over dense `f64` tensors,
//! with the layers a transformer encoder needs and the AdamW optimiser.
//!
//! A [`Tape`] records every operation in execution order; `backward`
//! replays it in reverse and returns gradients for every recorded node.

mod adamw;
mod attention;
mod gradcheck;
mod tape;
mod tensor;

pub use adamw::{adamw_step, AdamWConfig, OptimizerState};
pub use attention::{attention_weights, linear, multi_head_attention, AttentionOutput, AttentionParams};
pub use gradcheck::{grad_check, layer_suite, relative_error, CheckResult, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;
