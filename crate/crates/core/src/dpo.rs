//! Preference optimisation of a flow-matching model.
//!
//! For a winner/loser pair sharing a timestamp `t`, with squared residuals
//! `d = ‖u_t(z_t) − v_t‖²`, the per-pair loss is
//!
//! ```text
//! −log σ(−β · [(dθ_w − dθ_l) − (dref_w − dref_l)])  =  softplus(β · margin)
//! ```
//!
//! which is evaluated through `softplus` so that large `β` cannot overflow.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::loss::{accumulate_point_grad, squared_residual};
use crate::flow::{FmPoint, Gradient, SequenceSample, VectorField, VectorFieldModel};
use crate::optim::{AdamW, AdamWConfig};
use crate::seed;

/// One preference pair with its path draws fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct DpoBatchItem {
    pub winner: SequenceSample,
    pub loser: SequenceSample,
    /// Conditioning, including any reward-prompt extension.
    pub cond: Vec<f64>,
    pub t: f64,
    pub noise_w: Vec<f64>,
    pub noise_l: Vec<f64>,
}

impl DpoBatchItem {
    pub fn new(
        winner: SequenceSample,
        loser: SequenceSample,
        cond: Vec<f64>,
        t: f64,
        noise_w: Vec<f64>,
        noise_l: Vec<f64>,
    ) -> Result<Self> {
        if winner.prompt_id != loser.prompt_id {
            return Err(Error::InvalidArgument(format!(
                "winner prompt {} differs from loser prompt {}",
                winner.prompt_id, loser.prompt_id
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
        }
        Ok(Self {
            winner,
            loser,
            cond,
            t,
            noise_w,
            noise_l,
        })
    }

    fn winner_point(&self) -> FmPoint {
        FmPoint {
            z1: self.winner.values.clone(),
            cond: self.cond.clone(),
            z0: self.noise_w.clone(),
            t: self.t,
        }
    }

    fn loser_point(&self) -> FmPoint {
        FmPoint {
            z1: self.loser.values.clone(),
            cond: self.cond.clone(),
            z0: self.noise_l.clone(),
            t: self.t,
        }
    }
}

/// Winner, loser and the condition they are compared under.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceExample {
    pub winner: SequenceSample,
    pub loser: SequenceSample,
    pub cond: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpoConfig {
    pub beta: f64,
    pub epochs: usize,
    pub learning_rate_peak: f64,
    pub warmup_steps: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub fm_reg_weight: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: AdamWConfig,
}

impl Default for DpoConfig {
    /// Schedule of the published setup with a learning rate suited to small models.
    fn default() -> Self {
        Self {
            beta: 2000.0,
            epochs: 10,
            learning_rate_peak: 1e-4,
            warmup_steps: 1000,
            batch_size: 32,
            fm_reg_weight: 0.0,
            seed: 0,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl DpoConfig {
    /// Settings for billion-parameter models, with a `1e-6` peak rate.
    pub fn large_scale() -> Self {
        Self {
            learning_rate_peak: 1e-6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config("dpo.beta must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("dpo.batch_size must be ≥ 1".into()));
        }
        if !(self.fm_reg_weight.is_finite() && self.fm_reg_weight >= 0.0) {
            return Err(Error::Config("dpo.fm_reg_weight must be ≥ 0".into()));
        }
        if !(self.learning_rate_peak.is_finite() && self.learning_rate_peak >= 0.0) {
            return Err(Error::Config("dpo.learning_rate_peak must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Linear warmup to the peak, then linear decay to zero at `total_steps`.
    pub fn learning_rate(&self, step: usize, total_steps: usize) -> f64 {
        let peak = self.learning_rate_peak;
        if step < self.warmup_steps {
            return peak * (step + 1) as f64 / self.warmup_steps as f64;
        }
        let remaining = total_steps.saturating_sub(self.warmup_steps);
        if remaining == 0 {
            return peak;
        }
        peak * (total_steps - step) as f64 / remaining as f64
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-pair loss from the four squared residuals.
pub fn dpo_term(beta: f64, theta_w: f64, theta_l: f64, ref_w: f64, ref_l: f64) -> f64 {
    softplus(beta * preference_margin(theta_w, theta_l, ref_w, ref_l))
}

/// `(dθ_w − dθ_l) − (dref_w − dref_l)`; negative when θ favours the winner
/// more than the reference does.
pub fn preference_margin(theta_w: f64, theta_l: f64, ref_w: f64, ref_l: f64) -> f64 {
    (theta_w - theta_l) - (ref_w - ref_l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub theta_w: f64,
    pub theta_l: f64,
    pub ref_w: f64,
    pub ref_l: f64,
}

pub fn residuals(
    theta: &impl VectorField,
    theta_ref: &impl VectorField,
    item: &DpoBatchItem,
) -> Result<Residuals> {
    let (pw, pl) = (item.winner_point(), item.loser_point());
    Ok(Residuals {
        theta_w: squared_residual(theta, &pw)?,
        theta_l: squared_residual(theta, &pl)?,
        ref_w: squared_residual(theta_ref, &pw)?,
        ref_l: squared_residual(theta_ref, &pl)?,
    })
}

pub fn fm_dpo_loss(
    theta: &impl VectorField,
    theta_ref: &impl VectorField,
    batch: &[DpoBatchItem],
    beta: f64,
) -> Result<f64> {
    fm_regularized_dpo_loss(theta, theta_ref, batch, beta, 0.0)
}

/// DPO loss plus `weight ×` the flow-matching loss of the winners.
pub fn fm_regularized_dpo_loss(
    theta: &impl VectorField,
    theta_ref: &impl VectorField,
    batch: &[DpoBatchItem],
    beta: f64,
    weight: f64,
) -> Result<f64> {
    check_loss_args(batch, beta, weight)?;
    let mut dpo = 0.0;
    let mut fm = 0.0;
    for item in batch {
        let r = residuals(theta, theta_ref, item)?;
        dpo += dpo_term(beta, r.theta_w, r.theta_l, r.ref_w, r.ref_l);
        fm += r.theta_w;
    }
    let n = batch.len() as f64;
    if weight == 0.0 {
        Ok(dpo / n)
    } else {
        Ok(dpo / n + weight * (fm / n))
    }
}

fn check_loss_args(batch: &[DpoBatchItem], beta: f64, weight: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    if !(weight >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularisation weight must be ≥ 0, got {weight}"
        )));
    }
    Ok(())
}

pub fn fm_dpo_grad(
    theta: &VectorFieldModel,
    theta_ref: &impl VectorField,
    batch: &[DpoBatchItem],
    beta: f64,
) -> Result<Gradient> {
    Ok(fm_dpo_loss_and_grad(theta, theta_ref, batch, beta, 0.0)?.1)
}

/// Loss and gradient with respect to `theta` of [`fm_regularized_dpo_loss`].
pub fn fm_dpo_loss_and_grad(
    theta: &VectorFieldModel,
    theta_ref: &impl VectorField,
    batch: &[DpoBatchItem],
    beta: f64,
    weight: f64,
) -> Result<(f64, Gradient)> {
    check_loss_args(batch, beta, weight)?;
    let n = batch.len() as f64;
    let mut grad = theta.zero_gradient();
    let mut gw = theta.zero_gradient();
    let mut gl = theta.zero_gradient();
    let mut dpo = 0.0;
    let mut fm = 0.0;
    for item in batch {
        let (pw, pl) = (item.winner_point(), item.loser_point());
        gw.clear();
        gl.clear();
        let theta_w = accumulate_point_grad(theta, &pw, 1.0, &mut gw)?;
        let theta_l = accumulate_point_grad(theta, &pl, 1.0, &mut gl)?;
        let ref_w = squared_residual(theta_ref, &pw)?;
        let ref_l = squared_residual(theta_ref, &pl)?;
        let margin = preference_margin(theta_w, theta_l, ref_w, ref_l);
        dpo += softplus(beta * margin);
        fm += theta_w;
        // d softplus(β m)/dm = β σ(β m)
        let coef = beta * sigmoid(beta * margin) / n;
        grad.add_scaled_difference(&gw, &gl, coef);
        if weight != 0.0 {
            grad.add_scaled(&gw, weight / n);
        }
    }
    let loss = if weight == 0.0 {
        dpo / n
    } else {
        dpo / n + weight * (fm / n)
    };
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpoLog {
    /// `(step, minibatch loss)` per optimizer step.
    pub steps: Vec<(usize, f64)>,
    /// Mean minibatch loss per epoch.
    pub epoch_means: Vec<f64>,
}

impl DpoLog {
    /// `step, loss` per line.
    pub fn to_text(&self) -> String {
        self.steps
            .iter()
            .map(|(s, l)| format!("{s}, {l:.16e}\n"))
            .collect()
    }
}

/// Fine-tunes a copy of `theta_ref` on preference examples.
///
/// Each epoch shuffles the examples and redraws one `(t, z0_w, z0_l)` per
/// example. `theta_ref` stays untouched and anchors the loss throughout.
pub fn dpo_finetune(
    theta_ref: &VectorFieldModel,
    examples: &[PreferenceExample],
    config: &DpoConfig,
) -> Result<(VectorFieldModel, DpoLog)> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no preference examples".into()));
    }
    let mut theta = theta_ref.clone();
    let mut log = DpoLog {
        steps: Vec::new(),
        epoch_means: Vec::new(),
    };
    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut opt = AdamW::new(&theta, config.optimizer);
    let dim = theta_ref.sample_dim();
    let mut step = 0;
    for epoch in 0..config.epochs {
        let epoch_label = epoch.to_string();
        let mut draw_rng = seed::rng(seed::derive_seed(config.seed, &["draws", &epoch_label]));
        let draws: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..examples.len())
            .map(|_| {
                let t: f64 = draw_rng.random();
                let nw = seed::standard_normal_vec(&mut draw_rng, dim);
                let nl = seed::standard_normal_vec(&mut draw_rng, dim);
                (t, nw, nl)
            })
            .collect();
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive_seed(config.seed, &["order", &epoch_label])));

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let ex = &examples[i];
                    let (t, nw, nl) = &draws[i];
                    DpoBatchItem::new(
                        ex.winner.clone(),
                        ex.loser.clone(),
                        ex.cond.clone(),
                        *t,
                        nw.clone(),
                        nl.clone(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grad) =
                fm_dpo_loss_and_grad(&theta, theta_ref, &batch, config.beta, config.fm_reg_weight)?;
            opt.step(&mut theta, &grad, config.learning_rate(step, total_steps));
            log.steps.push((step, loss));
            epoch_loss += loss;
            step += 1;
        }
        log.epoch_means.push(epoch_loss / steps_per_epoch as f64);
    }
    Ok((theta, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ModelConfig;

    fn model(seed: u64) -> VectorFieldModel {
        let cfg = ModelConfig {
            hidden: vec![6],
            disconnected_cond_inputs: 0,
        };
        VectorFieldModel::init(4, 1, &cfg, seed).unwrap()
    }

    fn sample(prompt: &str, idx: usize, values: Vec<f64>) -> SequenceSample {
        SequenceSample::from_flat(prompt, idx, 0, 2, 2, values).unwrap()
    }

    fn item(seed_: u64) -> DpoBatchItem {
        let mut rng = seed::rng(seed_);
        let w = seed::standard_normal_vec(&mut rng, 4);
        let l = seed::standard_normal_vec(&mut rng, 4);
        DpoBatchItem::new(
            sample("p", 0, w),
            sample("p", 1, l),
            vec![1.0],
            rng.random(),
            seed::standard_normal_vec(&mut rng, 4),
            seed::standard_normal_vec(&mut rng, 4),
        )
        .unwrap()
    }

    #[test]
    fn identical_models_give_ln2() {
        let m = model(1);
        let batch: Vec<_> = (0..5).map(item).collect();
        let loss = fm_dpo_loss(&m, &m, &batch, 2000.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn scalar_closed_form() {
        let v = dpo_term(1.0, 0.1, 0.5, 0.3, 0.3);
        // −log σ(0.4) = ln(1 + e^{−0.4})
        assert!((v - (1.0 + (-0.4f64).exp()).ln()).abs() < 1e-15);
        assert!((v - 0.51301).abs() < 1e-5);
    }

    #[test]
    fn softplus_handles_extreme_arguments() {
        assert_eq!(softplus(-1e6), 0.0);
        assert_eq!(softplus(1e6), 1e6);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(sigmoid(-1e6), 0.0);
        assert_eq!(sigmoid(1e6), 1.0);
    }

    #[test]
    fn empty_batch_and_bad_weight() {
        let m = model(1);
        assert!(matches!(fm_dpo_loss(&m, &m, &[], 1.0), Err(Error::EmptyBatch)));
        assert!(fm_regularized_dpo_loss(&m, &m, &[item(0)], 1.0, -0.5).is_err());
    }

    #[test]
    fn mismatched_prompts_rejected() {
        let r = DpoBatchItem::new(
            sample("a", 0, vec![0.0; 4]),
            sample("b", 0, vec![0.0; 4]),
            vec![],
            0.5,
            vec![0.0; 4],
            vec![0.0; 4],
        );
        assert!(r.is_err());
    }

    #[test]
    fn symmetric_pair_has_zero_gradient() {
        let theta = model(2);
        let reference = model(3);
        let mut it = item(4);
        it.loser = SequenceSample {
            sample_index: 9,
            ..it.winner.clone()
        };
        it.noise_l = it.noise_w.clone();
        let g = fm_dpo_grad(&theta, &reference, &[it], 10.0).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn schedule_warms_up_then_decays() {
        let cfg = DpoConfig {
            learning_rate_peak: 1.0,
            warmup_steps: 4,
            ..Default::default()
        };
        assert_eq!(cfg.learning_rate(0, 12), 0.25);
        assert_eq!(cfg.learning_rate(3, 12), 1.0);
        assert_eq!(cfg.learning_rate(4, 12), 1.0);
        assert_eq!(cfg.learning_rate(11, 12), 0.125);
    }

    #[test]
    fn defaults_mirror_published_setup() {
        let d = DpoConfig::default();
        assert_eq!((d.epochs, d.beta, d.batch_size, d.warmup_steps), (10, 2000.0, 32, 1000));
        assert_eq!(d.optimizer, AdamWConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-2 });
        assert_eq!(d.learning_rate_peak, 1e-4);
        assert_eq!(DpoConfig::large_scale().learning_rate_peak, 1e-6);
    }

    #[test]
    fn zero_epochs_returns_reference_copy() {
        let reference = model(5);
        let ex = PreferenceExample {
            winner: sample("p", 0, vec![1.0; 4]),
            loser: sample("p", 1, vec![0.0; 4]),
            cond: vec![1.0],
        };
        let cfg = DpoConfig {
            epochs: 0,
            ..Default::default()
        };
        let (tuned, log) = dpo_finetune(&reference, &[ex], &cfg).unwrap();
        assert_eq!(tuned, reference);
        assert!(log.steps.is_empty());
        assert!(dpo_finetune(&reference, &[], &cfg).is_err());
    }
}
