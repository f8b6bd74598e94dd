use serde::{Deserialize, Serialize};

use super::percentile::percentile_sorted;
use crate::error::{Error, Result};
use crate::reward::{Axis, RewardTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercentileConfig {
    pub primary: f64,
    pub secondary: f64,
    pub floor: f64,
    pub semantic_ceiling: f64,
}

impl Default for PercentileConfig {
    fn default() -> Self {
        Self {
            primary: 95.0,
            secondary: 50.0,
            floor: 5.0,
            semantic_ceiling: 95.0,
        }
    }
}

impl PercentileConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("primary", self.primary),
            ("secondary", self.secondary),
            ("floor", self.floor),
            ("semantic_ceiling", self.semantic_ceiling),
        ] {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::Config(format!("pairing percentile {name} = {p} outside [0, 100]")));
            }
        }
        if self.secondary > self.primary {
            return Err(Error::Config("secondary percentile exceeds primary".into()));
        }
        Ok(())
    }
}

/// Margins, floors and the semantic ceiling, indexed by [`Axis::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub primary: [f64; 3],
    pub secondary: [f64; 3],
    pub floor: [f64; 3],
    pub semantic_ceiling: f64,
}

impl ThresholdSet {
    pub fn primary(&self, axis: Axis) -> f64 {
        self.primary[axis.index()]
    }

    pub fn secondary(&self, axis: Axis) -> f64 {
        self.secondary[axis.index()]
    }

    pub fn floor(&self, axis: Axis) -> f64 {
        self.floor[axis.index()]
    }
}

/// Thresholds from a complete table of `k` samples per prompt.
pub fn margin_thresholds(
    table: &RewardTable,
    k: usize,
    percentiles: &PercentileConfig,
) -> Result<ThresholdSet> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k ≥ 2 samples per prompt, got {k}")));
    }
    percentiles.validate()?;
    table.check_complete(k)?;
    let groups = table.by_prompt();
    let mut out = ThresholdSet {
        primary: [0.0; 3],
        secondary: [0.0; 3],
        floor: [0.0; 3],
        semantic_ceiling: 0.0,
    };
    for axis in Axis::ALL {
        let mut diffs = Vec::with_capacity(groups.len() * k * (k - 1) / 2);
        for rows in groups.values() {
            for (i, (_, a)) in rows.iter().enumerate() {
                for (_, b) in &rows[i + 1..] {
                    diffs.push((a.get(axis) - b.get(axis)).abs());
                }
            }
        }
        diffs.sort_by(f64::total_cmp);
        let mut raw = table.values(axis);
        raw.sort_by(f64::total_cmp);
        let i = axis.index();
        out.primary[i] = percentile_sorted(&diffs, percentiles.primary);
        out.secondary[i] = percentile_sorted(&diffs, percentiles.secondary);
        out.floor[i] = percentile_sorted(&raw, percentiles.floor);
        if axis == Axis::Semantic {
            out.semantic_ceiling = percentile_sorted(&raw, percentiles.semantic_ceiling);
        }
    }
    Ok(out)
}
