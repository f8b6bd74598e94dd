//! Multi-reward preference optimization for flow-matching sequence generators.
//!
//! The crate is a small, fully deterministic laboratory:
//!
//! - [`flow`]: conditional flow matching (probability path, regression loss,
//!   backpropagation, Euler sampling, reference training, checkpoints).
//! - [`dpo`]: the flow-matching preference loss, its gradient and the
//!   fine-tuning loop.
//! - [`reward`]: text-alignment, production-quality and semantic-consistency
//!   rewards, plus reward-table files.
//! - [`pairing`]: margin thresholds and strong-domination preference pairs.
//! - [`prompting`]: reward-conditioned prompt extensions.
//! - [`metrics`]: BPM-std, Fréchet distance, bootstrap net win rate, reports.
//! - [`harness`]: synthetic data, pool generation and the staged pipeline.

pub mod dpo;
pub mod error;
pub mod flow;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod pairing;
pub mod pool;
pub mod prompting;
pub mod reward;
pub mod seed;

pub use error::{Error, Result};
