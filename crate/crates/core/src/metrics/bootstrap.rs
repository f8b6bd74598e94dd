use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::percentile;
use crate::seed;

/// One annotator's judgement of a pair (A = our model).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    A,
    B,
    TieGood,
    TieBad,
}

impl Vote {
    pub fn score(self) -> f64 {
        match self {
            Vote::A => 1.0,
            Vote::B => -1.0,
            Vote::TieGood | Vote::TieBad => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub item_id: String,
    pub votes: Vec<Vote>,
}

impl PreferenceRecord {
    pub fn consensus(&self) -> Result<f64> {
        if self.votes.is_empty() {
            return Err(Error::InvalidArgument(format!("item {} has no votes", self.item_id)));
        }
        Ok(self.votes.iter().map(|v| v.score()).sum::<f64>() / self.votes.len() as f64)
    }
}

/// Net win rate in percent with its bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetWinRate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Item-level bootstrap of the mean consensus score, scaled to percent; the
/// interval spans the 2.5th and 97.5th nearest-rank percentiles.
pub fn net_win_rate_bootstrap(
    records: &[PreferenceRecord],
    resamples: usize,
    seed: u64,
) -> Result<NetWinRate> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no preference records".into()));
    }
    if resamples == 0 {
        return Err(Error::InvalidArgument("resamples must be ≥ 1".into()));
    }
    let scores: Vec<f64> = records.iter().map(PreferenceRecord::consensus).collect::<Result<_>>()?;
    let n = scores.len();
    let mut rng = seed::rng(seed);
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| scores[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / resamples as f64;
    Ok(NetWinRate {
        mean: 100.0 * mean,
        ci_low: 100.0 * percentile(&means, 2.5)?,
        ci_high: 100.0 * percentile(&means, 97.5)?,
    })
}
