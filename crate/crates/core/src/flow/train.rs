use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{draw_fm_points, fm_loss_grad_on, fm_loss_on};
use super::model::{ModelConfig, VectorFieldModel};
use crate::error::{Error, Result};
use crate::optim::{AdamW, AdamWConfig};
use crate::seed;

/// Reference-model training settings. Unknown keys are rejected on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTrainingConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub optimizer: AdamWConfig,
    /// Linearly anneal the learning rate to zero over `steps`.
    #[serde(default = "default_true")]
    pub decay: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ReferenceTrainingConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            learning_rate: 1e-3,
            batch_size: 64,
            seed: 0,
            model: ModelConfig::default(),
            optimizer: AdamWConfig::default(),
            decay: true,
        }
    }
}

impl ReferenceTrainingConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_model(&self, sample_dim: usize, cond_dim: usize) -> Result<VectorFieldModel> {
        VectorFieldModel::init(
            sample_dim,
            cond_dim,
            &self.model,
            seed::derive_seed(self.seed, &["init"]),
        )
    }
}

/// `(z1, cond)` pairs.
pub type TrainingSet = [(Vec<f64>, Vec<f64>)];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub initial_heldout_loss: f64,
    pub final_heldout_loss: f64,
    /// `(step, minibatch loss)` for every optimizer step.
    pub log: Vec<(usize, f64)>,
}

/// Trains a vector field from scratch with AdamW on the flow-matching loss.
///
/// Held-out loss uses one fixed draw of `(t, z0)` so that the initial and final
/// values are comparable.
pub fn train_reference(
    config: &ReferenceTrainingConfig,
    train: &TrainingSet,
    heldout: &TrainingSet,
) -> Result<(VectorFieldModel, TrainingSummary)> {
    config.validate()?;
    let (z1, cond) = train
        .first()
        .ok_or_else(|| Error::InvalidArgument("training set is empty".into()))?;
    let mut model = config.initial_model(z1.len(), cond.len())?;
    let heldout_points = draw_fm_points(heldout, seed::derive_seed(config.seed, &["heldout"]))?;
    let initial_heldout_loss = fm_loss_on(&model, &heldout_points)?;

    let mut opt = AdamW::new(&model, config.optimizer);
    let mut rng = seed::rng(seed::derive_seed(config.seed, &["batches"]));
    let mut log = Vec::with_capacity(config.steps);
    let mut batch = Vec::with_capacity(config.batch_size);
    for step in 0..config.steps {
        batch.clear();
        for _ in 0..config.batch_size {
            batch.push(train[rng.random_range(0..train.len())].clone());
        }
        let points = draw_fm_points(&batch, rng.random())?;
        let loss = fm_loss_on(&model, &points)?;
        let grad = fm_loss_grad_on(&model, &points)?;
        let lr = if config.decay {
            config.learning_rate * (config.steps - step) as f64 / config.steps as f64
        } else {
            config.learning_rate
        };
        opt.step(&mut model, &grad, lr);
        log.push((step, loss));
    }
    let final_heldout_loss = fm_loss_on(&model, &heldout_points)?;
    Ok((
        model,
        TrainingSummary {
            initial_heldout_loss,
            final_heldout_loss,
            log,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set(n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                let c = rng.random_range(0..2usize);
                let base = if c == 0 { [1.0, -1.0, 0.5, 0.0] } else { [-1.0, 0.5, 0.0, 1.0] };
                let z1 = base.iter().map(|b| b + 0.05 * rng.random::<f64>()).collect();
                let mut cond = vec![0.0; 2];
                cond[c] = 1.0;
                (z1, cond)
            })
            .collect()
    }

    fn small_config(steps: usize) -> ReferenceTrainingConfig {
        ReferenceTrainingConfig {
            steps,
            learning_rate: 1e-2,
            batch_size: 16,
            seed: 3,
            model: ModelConfig {
                hidden: vec![16, 16],
                disconnected_cond_inputs: 0,
            },
            ..Default::default()
        }
    }

    #[test]
    fn heldout_loss_decreases() {
        let (_, summary) =
            train_reference(&small_config(300), &toy_set(64, 1), &toy_set(32, 2)).unwrap();
        assert!(summary.final_heldout_loss < summary.initial_heldout_loss);
    }

    #[test]
    fn zero_steps_returns_initialisation() {
        let cfg = small_config(0);
        let (model, _) = train_reference(&cfg, &toy_set(8, 1), &toy_set(4, 2)).unwrap();
        assert_eq!(model, cfg.initial_model(4, 2).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_config(20);
        let (a, _) = train_reference(&cfg, &toy_set(16, 1), &toy_set(4, 2)).unwrap();
        let (b, _) = train_reference(&cfg, &toy_set(16, 1), &toy_set(4, 2)).unwrap();
        assert_eq!(a.parameter_hash(), b.parameter_hash());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ReferenceTrainingConfig::from_toml_str(
            "steps = 1\nlearning_rate = 0.1\nbatch_size = 2\nseed = 0\nlearnig_rate = 3\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("learnig_rate"), "{err}");
    }
}
