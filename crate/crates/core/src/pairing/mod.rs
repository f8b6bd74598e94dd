//! Preference-pair construction by multi-reward strong domination.
//!
//! Per reward axis, the primary margin is a high percentile of all
//! within-prompt absolute reward differences and the secondary margin their
//! median. A pair `(w, l)` qualifies for primary axis `s` when `w` beats `l`
//! by more than the primary margin on `s` and by more than the secondary
//! margin on every other axis. Pairs touching a sample below any axis floor,
//! or whose winner exceeds the semantic ceiling, are dropped, and each axis
//! is capped at `R` triplets.

mod mrsd;
mod percentile;
mod thresholds;
mod triplets;

pub use mrsd::{mrsd_candidates, mrsd_pairs, PreferenceTriplet};
pub use percentile::percentile;
pub use thresholds::{margin_thresholds, PercentileConfig, ThresholdSet};
pub use triplets::{emit_triplets, load_triplets, parse_triplets, serialize_triplets, TripletFile};
