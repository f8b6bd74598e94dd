use crate::error::{Error, Result};
use crate::flow::SequenceSample;

/// Smoothness score in `[1, 10]`: `1 + 9·(1 − clamp(ρ, 0, 1))`, where `ρ` is
/// the mean squared first difference over the mean squared value.
pub fn quality_reward(sample: &SequenceSample) -> Result<f64> {
    if sample.frames < 2 {
        return Err(Error::InvalidArgument(
            "quality reward needs at least two frames".into(),
        ));
    }
    let d = sample.dim;
    let v = &sample.values;
    let diff_sq: f64 = v[d..].iter().zip(v).map(|(b, a)| (b - a) * (b - a)).sum();
    let mean_diff = diff_sq / ((sample.frames - 1) * d) as f64;
    let mean_sq = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let rho = mean_diff / (mean_sq + 1e-12);
    Ok(1.0 + 9.0 * (1.0 - rho.clamp(0.0, 1.0)))
}
