//! Reward-conditioned prompt extensions.
//!
//! The generator's condition vector is extended by three entries, one per
//! reward axis. During fine-tuning they carry the winner's rewards; at
//! inference, a high percentile of the winners' rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::{percentile, PreferenceTriplet};
use crate::pool::SampleKey;
use crate::reward::{Axis, RewardTable, RewardVector};

/// Number of entries appended to the condition vector.
pub const PROMPT_DIM: usize = 3;

/// Percentile of winner rewards used for inference prompts.
pub const INFERENCE_PERCENTILE: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardPromptMode {
    #[default]
    Continuous,
    Binary,
    None,
}

/// Pool-level normalization statistics for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisStats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl AxisStats {
    /// Min-max normalization; a degenerate range maps everything to 0.5.
    pub fn normalize(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (value - self.min) / span
        } else {
            0.5
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptStats {
    pub axes: [AxisStats; 3],
}

impl PromptStats {
    pub fn from_table(table: &RewardTable) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidArgument("prompt statistics of an empty table".into()));
        }
        let axes = Axis::ALL.map(|axis| {
            let values = table.values(axis);
            AxisStats {
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                median: percentile(&values, 50.0).expect("table is nonempty"),
            }
        });
        Ok(Self { axes })
    }

    pub fn axis(&self, axis: Axis) -> &AxisStats {
        &self.axes[axis.index()]
    }
}

/// A prompt extension together with the mode that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardPrompt {
    pub mode: RewardPromptMode,
    pub values: [f64; PROMPT_DIM],
}

impl RewardPrompt {
    pub fn from_rewards(
        rewards: &RewardVector,
        stats: Option<&PromptStats>,
        mode: RewardPromptMode,
    ) -> Result<Self> {
        let values = match mode {
            RewardPromptMode::None => [0.0; PROMPT_DIM],
            RewardPromptMode::Continuous => {
                let stats = require(stats)?;
                Axis::ALL.map(|a| stats.axis(a).normalize(rewards.get(a)))
            }
            RewardPromptMode::Binary => {
                let stats = require(stats)?;
                Axis::ALL.map(|a| {
                    if rewards.get(a) >= stats.axis(a).median {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
        };
        Ok(Self { mode, values })
    }
}

fn require(stats: Option<&PromptStats>) -> Result<&PromptStats> {
    stats.ok_or_else(|| Error::InvalidArgument("reward prompt needs pool statistics".into()))
}

/// Extension built from a training triplet's winner rewards.
pub fn build_training_prompt(
    triplet: &PreferenceTriplet,
    stats: Option<&PromptStats>,
    mode: RewardPromptMode,
) -> Result<[f64; PROMPT_DIM]> {
    Ok(RewardPrompt::from_rewards(&triplet.winner_rewards, stats, mode)?.values)
}

/// Extension built from the per-axis 99th percentile of `winners`.
pub fn build_inference_prompt(
    winners: &RewardTable,
    stats: Option<&PromptStats>,
    mode: RewardPromptMode,
) -> Result<[f64; PROMPT_DIM]> {
    if winners.is_empty() {
        return Err(Error::InvalidArgument("inference prompt from an empty table".into()));
    }
    if mode == RewardPromptMode::None {
        return Ok([0.0; PROMPT_DIM]);
    }
    let p = Axis::ALL.map(|a| {
        percentile(&winners.values(a), INFERENCE_PERCENTILE).expect("table is nonempty")
    });
    let rewards = RewardVector {
        text: p[0],
        quality: p[1],
        semantic: p[2],
    };
    Ok(RewardPrompt::from_rewards(&rewards, stats, mode)?.values)
}

/// Distinct winner samples of `triplets`, each counted once.
pub fn winner_table(triplets: &[PreferenceTriplet]) -> RewardTable {
    let mut table = RewardTable::default();
    for t in triplets {
        table.insert(SampleKey::new(t.prompt_id.clone(), t.winner_index), t.winner_rewards);
    }
    table
}

pub fn extend_condition(cond: &[f64], extension: &[f64; PROMPT_DIM]) -> Vec<f64> {
    let mut out = Vec::with_capacity(cond.len() + PROMPT_DIM);
    out.extend_from_slice(cond);
    out.extend_from_slice(extension);
    out
}
