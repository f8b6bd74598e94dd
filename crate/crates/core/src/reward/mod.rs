//! The three reward axes and reward-table files.
//!
//! - text alignment: cosine similarity between an embedded sample and the
//!   prompt's embedding;
//! - production quality: a smoothness score in `[1, 10]`;
//! - semantic consistency: mean over frames of the maximum log-probability of
//!   the frame under a temperature softmax over codebook cosine similarities.

mod codebook;
mod features;
mod quality;
mod scoring;
mod semantic;
mod table;

pub use codebook::{centroid_probs, kmeans_fit, Codebook, KMeansFit, DEFAULT_TEMPERATURE};
pub use features::{cosine_similarity, FeatureMap, Projection};
pub use quality::quality_reward;
pub use scoring::{score_pool, RewardModels};
pub use semantic::semantic_consistency_score;
pub use table::{load_reward_table, Axis, RewardTable, RewardVector};

/// Embedding-space cosine between an embedded sample and a prompt embedding.
pub fn text_alignment_reward(
    sample: &crate::flow::SequenceSample,
    tower: &FeatureMap,
    cond_embedding: &[f64],
) -> crate::Result<f64> {
    let dim = sample.dim;
    let mut mean = vec![0.0; dim];
    for frame in sample.frame_iter() {
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= sample.frames as f64;
    }
    let embedded = tower.apply(&mean)?;
    Ok(cosine_similarity(&embedded, cond_embedding)?.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::SequenceSample;

    fn constant(frame: &[f64]) -> SequenceSample {
        let frames = vec![frame.to_vec(); 3];
        SequenceSample::from_frames("p", 0, 0, &frames).unwrap()
    }

    #[test]
    fn parallel_orthogonal_and_diagonal() {
        let id = FeatureMap::Identity;
        let s = constant(&[2.0, 0.0, 0.0]);
        assert_eq!(text_alignment_reward(&s, &id, &[5.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(text_alignment_reward(&s, &id, &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let d = constant(&[1.0, 1.0, 0.0]);
        let v = text_alignment_reward(&d, &id, &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn zero_embedding_is_an_error() {
        let s = constant(&[0.0, 0.0]);
        assert!(text_alignment_reward(&s, &FeatureMap::Identity, &[1.0, 0.0]).is_err());
        let s = constant(&[1.0, 0.0]);
        assert!(text_alignment_reward(&s, &FeatureMap::Identity, &[0.0, 0.0]).is_err());
    }
}
