use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::frechet::frechet_distance;
use super::tempo::{bpm_std, onset_envelope, DEFAULT_WINDOW_SECONDS};
use crate::error::{Error, Result};
use crate::flow::{euler_sample, SequenceSample, VectorField, DEFAULT_EULER_STEPS};
use crate::reward::{RewardModels, RewardVector};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub samples_per_prompt: usize,
    pub euler_steps: usize,
    /// Frames per second used to interpret the onset envelope.
    pub frame_rate: f64,
    pub window_seconds: f64,
    pub resamples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples_per_prompt: 4,
            euler_steps: DEFAULT_EULER_STEPS,
            frame_rate: 4.8,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            resamples: 1000,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("eval.{m}")));
        if self.samples_per_prompt == 0 {
            return bad("samples_per_prompt must be ≥ 1");
        }
        if self.euler_steps == 0 {
            return bad("euler_steps must be ≥ 1");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be positive");
        }
        if !(self.window_seconds >= 2.0 && self.window_seconds.is_finite()) {
            return bad("window_seconds must be ≥ 2");
        }
        if self.resamples == 0 {
            return bad("resamples must be ≥ 1");
        }
        Ok(())
    }
}

/// A held-out prompt with its full condition vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPrompt {
    pub id: String,
    pub condition: usize,
    pub cond: Vec<f64>,
}

/// Per-axis mean rewards, mean BPM-std and Fréchet distance of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub config_hash: String,
    pub seed: u64,
    pub quality: f64,
    pub text: f64,
    pub semantic: f64,
    pub bpm_std: f64,
    pub frechet: f64,
}

const METRICS: [&str; 5] = ["quality", "text", "semantic", "bpm_std", "frechet"];

impl Report {
    fn values(&self) -> [f64; 5] {
        [self.quality, self.text, self.semantic, self.bpm_std, self.frechet]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# report config={} seed={} bpm_std=population\n",
            self.config_hash, self.seed
        );
        for (name, v) in METRICS.iter().zip(self.values()) {
            writeln!(out, "{name}={v:.6}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let mut config_hash = None;
        let mut seed = None;
        for field in header
            .strip_prefix("# report ")
            .ok_or_else(|| Error::parse(1, "expected `# report`"))?
            .split_whitespace()
        {
            match field.split_once('=') {
                Some(("config", v)) => config_hash = Some(v.to_string()),
                Some(("seed", v)) => {
                    seed = Some(v.parse().map_err(|_| Error::parse(1, format!("invalid seed `{v}`")))?)
                }
                Some(("bpm_std", _)) => {}
                _ => return Err(Error::parse(1, format!("unknown header field `{field}`"))),
            }
        }
        let mut values = [0.0; 5];
        for (i, name) in METRICS.iter().enumerate() {
            let line_no = i + 2;
            let line = lines.next().ok_or_else(|| Error::parse(line_no, format!("missing {name}")))?;
            let v = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| Error::parse(line_no, format!("expected `{name}=`")))?;
            values[i] = v
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid value `{v}`")))?;
        }
        Ok(Self {
            config_hash: config_hash.ok_or_else(|| Error::parse(1, "header lacks config"))?,
            seed: seed.ok_or_else(|| Error::parse(1, "header lacks seed"))?,
            quality: values[0],
            text: values[1],
            semantic: values[2],
            bpm_std: values[3],
            frechet: values[4],
        })
    }
}

/// Everything computed while evaluating one model.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: Report,
    pub samples: Vec<SequenceSample>,
    pub rewards: Vec<RewardVector>,
    /// Per-frame features of every sample, in sample order.
    pub features: Vec<Vec<f64>>,
}

/// Samples `cfg.samples_per_prompt` sequences per prompt and summarizes them.
///
/// Sample seeds depend only on `seed`, the prompt id and the sample index, so
/// two models evaluated with the same seed start from the same noise. The
/// Fréchet distance is taken against `reference` features, or against the
/// model's own features when none are given.
pub fn reward_report(
    model: &impl VectorField,
    prompts: &[EvalPrompt],
    rewards: &RewardModels,
    cfg: &EvalConfig,
    frames: usize,
    seed: u64,
    reference: Option<&[Vec<f64>]>,
) -> Result<Evaluation> {
    if prompts.is_empty() {
        return Err(Error::InvalidArgument("no evaluation prompts".into()));
    }
    cfg.validate()?;
    let mut samples = Vec::new();
    let mut scores = Vec::new();
    let mut features = Vec::new();
    let mut bpm_total = 0.0;
    for p in prompts {
        for j in 0..cfg.samples_per_prompt {
            let s = seed::derive_seed(seed, &["eval", &p.id, &j.to_string()]);
            let sample = euler_sample(model, &p.cond, cfg.euler_steps, s, frames, &p.id, j)?;
            scores.push(rewards.score(&sample, p.condition)?);
            bpm_total += bpm_std(&onset_envelope(&sample), cfg.frame_rate, cfg.window_seconds)?;
            for frame in sample.frame_iter() {
                features.push(rewards.feature_map.apply(frame)?);
            }
            samples.push(sample);
        }
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&RewardVector) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let frechet = frechet_distance(&features, reference.unwrap_or(&features))?;
    let report = Report {
        config_hash: String::new(),
        seed,
        quality: mean(|r| r.quality),
        text: mean(|r| r.text),
        semantic: mean(|r| r.semantic),
        bpm_std: bpm_total / n,
        frechet,
    };
    Ok(Evaluation {
        report,
        samples,
        rewards: scores,
        features,
    })
}
