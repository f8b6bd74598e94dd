use super::codebook::Codebook;
use super::features::FeatureMap;
use crate::error::{Error, Result};
use crate::flow::SequenceSample;

/// `max_c log p(c | frame)`, computed as `−ln Σ_c exp((s_c − s_max)/τ)`.
pub(crate) fn max_log_prob(features: &[f64], codebook: &Codebook) -> Result<f64> {
    let sims = codebook.similarities(features)?;
    let tau = codebook.temperature();
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = sims.iter().map(|s| ((s - max) / tau).exp()).sum();
    Ok(-z.ln())
}

/// Mean over frames of the most likely centroid's log-probability; always ≤ 0.
pub fn semantic_consistency_score(
    sample: &SequenceSample,
    codebook: &Codebook,
    feature_map: &FeatureMap,
) -> Result<f64> {
    let mut total = 0.0;
    for (t, frame) in sample.frame_iter().enumerate() {
        let features = feature_map.apply(frame)?;
        total += max_log_prob(&features, codebook).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("frame {t}: {m}")),
            other => other,
        })?;
    }
    Ok(total / sample.frames as f64)
}
