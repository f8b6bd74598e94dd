//! Evaluation metrics: tempo stability, Fréchet distance between feature
//! sets, bootstrap net win rate, and the per-model reward report.

mod bootstrap;
mod frechet;
mod report;
mod tempo;

pub use bootstrap::{net_win_rate_bootstrap, NetWinRate, PreferenceRecord, Vote};
pub use frechet::{frechet_distance, FRECHET_EPSILON};
pub use report::{reward_report, EvalConfig, EvalPrompt, Evaluation, Report};
pub use tempo::{bpm_std, estimate_bpm, onset_envelope, TempoTrace, DEFAULT_WINDOW_SECONDS, MAX_BPM, MIN_BPM};
