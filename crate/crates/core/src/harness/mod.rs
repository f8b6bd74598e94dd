//! End-to-end experiment: toy data, reference training, candidate pools,
//! scoring, pairing, preference fine-tuning and evaluation.
//!
//! Each stage reads its inputs from the output directory and writes its
//! artifacts back there; a stage whose inputs, configuration and seed are
//! unchanged since its last successful run is skipped.

mod config;
mod data;
mod stages;

pub use config::{
    DataConfig, DpoSection, EvalSection, ExperimentConfig, ModelSection, PairingSection, PoolSection,
    PromptingSection, RewardsSection, TrainingSection,
};
pub use data::{condition_vector, gen_pool, generate_dataset, template, Dataset, DatasetItem};
pub use stages::{
    artifacts, run_pipeline, run_stage, PipelineOutcome, Stage, StageOutcome,
};
