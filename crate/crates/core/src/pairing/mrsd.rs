use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::thresholds::ThresholdSet;
use crate::reward::{Axis, RewardTable, RewardVector};
use crate::seed;

/// A winner/loser pair within one prompt and the axis it dominates on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriplet {
    pub prompt_id: String,
    pub winner_index: usize,
    pub loser_index: usize,
    pub primary_axis: Axis,
    pub winner_rewards: RewardVector,
    pub loser_rewards: RewardVector,
}

impl PreferenceTriplet {
    /// Re-checks the domination inequalities from the stored rewards.
    pub fn dominates(&self, th: &ThresholdSet) -> bool {
        strongly_dominates(&self.winner_rewards, &self.loser_rewards, self.primary_axis, th)
    }

    /// Floors on both members and the ceiling on the winner.
    pub fn within_bounds(&self, th: &ThresholdSet) -> bool {
        above_floors(&self.winner_rewards, th)
            && above_floors(&self.loser_rewards, th)
            && self.winner_rewards.semantic <= th.semantic_ceiling
    }
}

fn strongly_dominates(w: &RewardVector, l: &RewardVector, primary: Axis, th: &ThresholdSet) -> bool {
    Axis::ALL.into_iter().all(|axis| {
        let margin = if axis == primary {
            th.primary(axis)
        } else {
            th.secondary(axis)
        };
        w.get(axis) - l.get(axis) > margin
    })
}

fn above_floors(r: &RewardVector, th: &ThresholdSet) -> bool {
    Axis::ALL.into_iter().all(|a| r.get(a) >= th.floor(a))
}

/// All qualifying pairs before down-sampling, one list per axis in
/// [`Axis::ALL`] order. Within a list pairs are ordered by prompt, then
/// winner index, then loser index.
pub fn mrsd_candidates(table: &RewardTable, th: &ThresholdSet) -> [Vec<PreferenceTriplet>; 3] {
    let mut out: [Vec<PreferenceTriplet>; 3] = Default::default();
    for (prompt, rows) in table.by_prompt() {
        for axis in Axis::ALL {
            for (wi, w) in &rows {
                if !above_floors(w, th) || w.semantic > th.semantic_ceiling {
                    continue;
                }
                for (li, l) in &rows {
                    if wi == li || !above_floors(l, th) {
                        continue;
                    }
                    if strongly_dominates(w, l, axis, th) {
                        out[axis.index()].push(PreferenceTriplet {
                            prompt_id: prompt.to_string(),
                            winner_index: *wi,
                            loser_index: *li,
                            primary_axis: axis,
                            winner_rewards: *w,
                            loser_rewards: *l,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Strong-domination pairs with at most `r` triplets per primary axis.
///
/// Axes over the cap are down-sampled uniformly without replacement; the kept
/// triplets stay in candidate order. Output is grouped by axis.
pub fn mrsd_pairs(table: &RewardTable, th: &ThresholdSet, r: usize, seed: u64) -> Vec<PreferenceTriplet> {
    let mut out = Vec::new();
    for (axis, candidates) in Axis::ALL.into_iter().zip(mrsd_candidates(table, th)) {
        if candidates.len() <= r {
            out.extend(candidates);
            continue;
        }
        let mut rng = seed::rng(seed::derive_seed(seed, &["mrsd", axis.name()]));
        let mut keep = index::sample(&mut rng, candidates.len(), r).into_vec();
        keep.sort_unstable();
        let mut candidates: Vec<Option<PreferenceTriplet>> = candidates.into_iter().map(Some).collect();
        out.extend(keep.into_iter().map(|i| candidates[i].take().expect("indices are distinct")));
    }
    out
}
