//! Conditional flow matching on flattened frame sequences.
//!
//! The probability path is the straight line `z_t = t·z1 + (1−t)·z0` with
//! `z0 ~ N(0, I)`, so the regression target is the constant field
//! `v_t = z1 − z0`. The learned field is a small tanh MLP fed with
//! `[z_t, cond, t]`.

mod checkpoint;
pub(crate) mod loss;
mod model;
mod path;
mod sampler;
mod sample;
mod train;

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, serialize_checkpoint};
pub use loss::{draw_fm_points, fm_loss, fm_loss_grad, fm_loss_grad_on, fm_loss_on, FmPoint};
pub use model::{Activation, Dense, Gradient, ModelConfig, Trace, VectorField, VectorFieldModel};
pub use path::{sample_path, PathPoint};
pub use sample::SequenceSample;
pub use sampler::{euler_sample, euler_sample_flat, DEFAULT_EULER_STEPS};
pub use train::{train_reference, ReferenceTrainingConfig, TrainingSet, TrainingSummary};
