use serde::{Deserialize, Serialize};

use super::codebook::Codebook;
use super::features::FeatureMap;
use super::quality::quality_reward;
use super::semantic::semantic_consistency_score;
use super::table::{RewardTable, RewardVector};
use super::text_alignment_reward;
use crate::error::{Error, Result};
use crate::flow::SequenceSample;
use crate::pool::{Pool, SampleKey};

/// Everything needed to score a sample on all three axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModels {
    pub codebook: Codebook,
    pub feature_map: FeatureMap,
    /// Stand-in for the audio tower of a joint text/audio embedding model.
    pub text_tower: FeatureMap,
    /// One embedding per discrete condition, in the tower's output space.
    pub condition_embeddings: Vec<Vec<f64>>,
}

impl RewardModels {
    pub fn score(&self, sample: &SequenceSample, condition: usize) -> Result<RewardVector> {
        let embedding = self.condition_embeddings.get(condition).ok_or_else(|| {
            Error::InvalidArgument(format!("no embedding for condition {condition}"))
        })?;
        RewardVector::new(
            text_alignment_reward(sample, &self.text_tower, embedding)?,
            quality_reward(sample)?,
            semantic_consistency_score(sample, &self.codebook, &self.feature_map)?,
        )
    }
}

/// Scores every sample of a complete pool (`k` samples per prompt).
pub fn score_pool(pool: &Pool, models: &RewardModels, k: usize) -> Result<RewardTable> {
    pool.check_complete(k)?;
    let mut table = RewardTable::default();
    for prompt in &pool.prompts {
        for i in 0..k {
            let sample = pool.get(&prompt.id, i).expect("pool checked complete");
            table.insert(SampleKey::new(&prompt.id, i), models.score(sample, prompt.condition)?);
        }
    }
    Ok(table)
}
