use sha2::{Digest, Sha256};
use serde::{Deserialize, Serialize};

use crate::dpo::DpoConfig;
use crate::error::{Error, Result};
use crate::flow::{ModelConfig, ReferenceTrainingConfig, DEFAULT_EULER_STEPS};
use crate::metrics::EvalConfig;
use crate::optim::AdamWConfig;
use crate::pairing::PercentileConfig;
use crate::prompting::{RewardPromptMode, PROMPT_DIM};
use crate::reward::DEFAULT_TEMPERATURE;
use crate::seed;

/// Synthetic dataset shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Frames per sequence.
    pub frames: usize,
    /// Values per frame.
    pub dim: usize,
    pub conditions: usize,
    /// Typical standard deviation of the i.i.d. Gaussian noise added to templates.
    pub noise: f64,
    /// Per-sample noise levels are uniform on `noise·[1 − spread, 1 + spread]`.
    pub noise_spread: f64,
    /// Number of shared rough artifact directions mixed into every sample.
    pub artifacts: usize,
    /// Standard deviation of each sample's artifact coefficients.
    pub artifact_scale: f64,
    /// Per-dimension magnitude of the template frames.
    pub amplitude: f64,
    /// Frames each template pattern is held before switching, cycled over
    /// conditions; sets the condition's tempo.
    pub periods: Vec<usize>,
    pub train_per_condition: usize,
    pub heldout_per_condition: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            frames: 32,
            dim: 8,
            conditions: 8,
            noise: 0.15,
            noise_spread: 0.0,
            artifacts: 2,
            artifact_scale: 0.4,
            amplitude: 2.0,
            periods: vec![3, 4, 5, 6],
            train_per_condition: 64,
            heldout_per_condition: 8,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conditions < 2 {
            return Err(Error::Config("data.conditions must be ≥ 2".into()));
        }
        if self.frames < 2 || self.dim < 2 {
            return Err(Error::Config("data.frames and data.dim must be ≥ 2".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config("data.noise must be ≥ 0".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_spread) {
            return Err(Error::Config("data.noise_spread must lie in [0, 1]".into()));
        }
        if !(self.artifact_scale.is_finite() && self.artifact_scale >= 0.0) {
            return Err(Error::Config("data.artifact_scale must be ≥ 0".into()));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Config("data.amplitude must be positive".into()));
        }
        if self.periods.is_empty() || self.periods.contains(&0) {
            return Err(Error::Config("data.periods must be nonempty and positive".into()));
        }
        if self.train_per_condition == 0 || self.heldout_per_condition == 0 {
            return Err(Error::Config("data split sizes must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn sample_dim(&self) -> usize {
        self.frames * self.dim
    }

    /// One-hot condition plus the reward-prompt extension.
    pub fn cond_dim(&self) -> usize {
        self.conditions + PROMPT_DIM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256, 256],
        }
    }
}

impl ModelSection {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden.clone(),
            disconnected_cond_inputs: PROMPT_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub decay: bool,
    pub optimizer: AdamWConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            steps: 3000,
            learning_rate: 1e-3,
            batch_size: 64,
            decay: true,
            optimizer: AdamWConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSection {
    pub prompts: usize,
    /// Samples per prompt.
    pub k: usize,
    pub euler_steps: usize,
}

impl Default for PoolSection {
    fn default() -> Self {
        Self {
            prompts: 64,
            k: 16,
            euler_steps: DEFAULT_EULER_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardsSection {
    pub codebook_size: usize,
    pub temperature: f64,
    pub kmeans_iterations: usize,
}

impl Default for RewardsSection {
    fn default() -> Self {
        Self {
            codebook_size: 64,
            temperature: DEFAULT_TEMPERATURE,
            kmeans_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingSection {
    /// Maximum triplets per primary axis.
    pub r: usize,
    pub percentiles: PercentileConfig,
}

impl Default for PairingSection {
    fn default() -> Self {
        Self {
            r: 500,
            percentiles: PercentileConfig::default(),
        }
    }
}

/// Preference fine-tuning settings; see [`DpoConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpoSection {
    pub beta: f64,
    pub epochs: usize,
    pub learning_rate_peak: f64,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub fm_reg_weight: f64,
    pub optimizer: AdamWConfig,
}

impl Default for DpoSection {
    fn default() -> Self {
        Self {
            beta: 20.0,
            epochs: 10,
            learning_rate_peak: 3e-4,
            warmup_steps: 20,
            batch_size: 8,
            fm_reg_weight: 1.0,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl DpoSection {
    pub fn dpo_config(&self, seed: u64) -> DpoConfig {
        DpoConfig {
            beta: self.beta,
            epochs: self.epochs,
            learning_rate_peak: self.learning_rate_peak,
            warmup_steps: self.warmup_steps,
            batch_size: self.batch_size,
            fm_reg_weight: self.fm_reg_weight,
            seed,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptingSection {
    pub mode: RewardPromptMode,
}

/// Full experiment configuration. Missing keys take the toy defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub pool: PoolSection,
    pub rewards: RewardsSection,
    pub pairing: PairingSection,
    pub dpo: DpoSection,
    pub prompting: PromptingSection,
    pub eval: EvalSection,
}

/// Evaluation settings; see [`EvalConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Held-out prompts, cycling over conditions.
    pub prompts: usize,
    pub samples_per_prompt: usize,
    pub euler_steps: usize,
    pub frame_rate: f64,
    pub window_seconds: f64,
    pub resamples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let m = EvalConfig::default();
        Self {
            prompts: 16,
            samples_per_prompt: 16,
            euler_steps: m.euler_steps,
            frame_rate: m.frame_rate,
            window_seconds: m.window_seconds,
            resamples: m.resamples,
        }
    }
}

impl EvalSection {
    pub fn metrics(&self) -> EvalConfig {
        EvalConfig {
            samples_per_prompt: self.samples_per_prompt,
            euler_steps: self.euler_steps,
            frame_rate: self.frame_rate,
            window_seconds: self.window_seconds,
            resamples: self.resamples,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return Err(Error::Config("model.hidden needs positive widths".into()));
        }
        self.reference_config().validate()?;
        if self.pool.prompts == 0 {
            return Err(Error::Config("pool.prompts must be ≥ 1".into()));
        }
        if self.pool.k < 2 {
            return Err(Error::Config("pool.k must be ≥ 2".into()));
        }
        if self.pool.euler_steps == 0 {
            return Err(Error::Config("pool.euler_steps must be ≥ 1".into()));
        }
        if self.rewards.codebook_size == 0 || self.rewards.kmeans_iterations == 0 {
            return Err(Error::Config("rewards.codebook_size and kmeans_iterations must be ≥ 1".into()));
        }
        if !(self.rewards.temperature > 0.0 && self.rewards.temperature.is_finite()) {
            return Err(Error::Config("rewards.temperature must be > 0".into()));
        }
        self.pairing.percentiles.validate()?;
        self.dpo.dpo_config(0).validate()?;
        if self.eval.prompts == 0 {
            return Err(Error::Config("eval.prompts must be ≥ 1".into()));
        }
        self.eval.metrics().validate()
    }

    pub fn reference_config(&self) -> ReferenceTrainingConfig {
        ReferenceTrainingConfig {
            steps: self.training.steps,
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            seed: seed::derive_seed(self.seed, &["train-ref"]),
            model: self.model.model_config(),
            optimizer: self.training.optimizer,
            decay: self.training.decay,
        }
    }

    /// Short content hash of the whole configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}
